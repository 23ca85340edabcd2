#pragma once

// Least-squares + dynamic-regressor-extension parameter estimator with
// forgetting. The vector estimate G0hat tracks the full parameter vector of
// a (possibly over-parameterized) linear regression; an adjugate-based
// mixing step produces decoupled scalar regressions for the two leading
// parameters, whose estimates are driven through scalar update laws with a
// projection keeping the second component away from zero.
//
// The dimension is a template parameter: the quadratic regression uses five
// parameters, the linear internal-voltage regression uses four.

#include "sgobs/types.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>
#include <utility>
#include <vector>

namespace sgobs {

/// Adjugate via explicit cofactor expansion; adj(A) * A = det(A) * I holds
/// for singular A as well, which matters because the mixing matrix is
/// exactly singular at start-up.
template <int N>
Eigen::Matrix<double, N, N> adjugate(const Eigen::Matrix<double, N, N>& A) {
  Eigen::Matrix<double, N, N> adj;
  if constexpr (N == 1) {
    adj(0, 0) = 1.0;
    return adj;
  } else {
    Eigen::Matrix<double, N - 1, N - 1> minor;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        int rr = 0;
        for (int r = 0; r < N; ++r) {
          if (r == i) continue;
          int cc = 0;
          for (int c = 0; c < N; ++c) {
            if (c == j) continue;
            minor(rr, cc) = A(r, c);
            ++cc;
          }
          ++rr;
        }
        const double cof = ((i + j) % 2 == 0 ? 1.0 : -1.0) * minor.determinant();
        adj(j, i) = cof;  // transpose of the cofactor matrix
      }
    }
    return adj;
  }
}

template <int N>
struct LsDremConfig {
  double gain_ls = 50.0;    ///< vector least-squares gain
  double gain1 = 100.0;     ///< scalar gain, first parameter
  double gain2 = 100.0;     ///< scalar gain, second parameter
  double f0 = 10.0;         ///< inverse initial covariance scale, F(0) = I/f0
  double chi0 = 0.5;        ///< forgetting base rate
  double k = 1.0;           ///< covariance norm ceiling (k >= 1/f0)
  double theta2_min = 0.1;  ///< projection bound on |theta2 estimate|
  int theta2_sign = +1;     ///< known sign of the second parameter
  Vec2 theta_init = Vec2(0.0, 0.5);  ///< initial scalar estimates

  void validate() const {
    if (gain_ls < 0.0 || gain1 < 0.0 || gain2 < 0.0)
      throw std::invalid_argument("LsDremConfig: gains must be nonnegative");
    if (f0 <= 0.0) throw std::invalid_argument("LsDremConfig: f0 must be positive");
    if (chi0 <= 0.0) throw std::invalid_argument("LsDremConfig: chi0 must be positive");
    if (k < 1.0 / f0) throw std::invalid_argument("LsDremConfig: k must be at least 1/f0");
    if (theta2_min <= 0.0)
      throw std::invalid_argument("LsDremConfig: theta2_min must be positive");
    if (theta2_sign != 1 && theta2_sign != -1)
      throw std::invalid_argument("LsDremConfig: theta2_sign must be +1 or -1");
    if (theta2_sign * theta_init(1) < theta2_min)
      throw std::invalid_argument("LsDremConfig: theta_init violates the projection bound");
  }
};

template <int N>
struct LsDremStepInfo {
  double Delta = 0.0;                ///< mixing determinant
  Eigen::Matrix<double, N, 1> Yvec;  ///< mixed per-parameter outputs
  double residual = 0.0;             ///< max |Y - psi' G0hat| over rows
  double normF = 0.0;                ///< spectral norm of F
};

/// One scalar measurement row Y = psi' G0.
template <int N>
struct RegressionRow {
  Eigen::Matrix<double, N, 1> psi;
  double Y = 0.0;
};

template <int N>
class LsDremCore {
 public:
  using VecN = Eigen::Matrix<double, N, 1>;
  using MatN = Eigen::Matrix<double, N, N>;
  using Row = RegressionRow<N>;

  explicit LsDremCore(const LsDremConfig<N>& cfg, const VecN& G0_init = VecN::Zero())
      : cfg_(cfg), G0_(G0_init), G0_init_(G0_init) {
    cfg.validate();
    F_ = MatN::Identity() / cfg.f0;
    z_ = 1.0;
    th1_ = cfg.theta_init(0);
    th2_ = cfg.theta_init(1);
  }

  /// Advance the whole estimator by one step of length dt, holding the given
  /// measurement rows constant. All states are integrated together with the
  /// classical 4th-order Runge-Kutta scheme; the projection on the second
  /// scalar estimate is enforced after the step.
  LsDremStepInfo<N> advance(const std::vector<Row>& rows, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("LsDremCore: dt must be positive");
    const PackedState s0 = pack();
    const PackedState k1 = rhs(s0, rows);
    const PackedState k2 = rhs(s0 + 0.5 * dt * k1, rows);
    const PackedState k3 = rhs(s0 + 0.5 * dt * k2, rows);
    const PackedState k4 = rhs(s0 + dt * k3, rows);
    unpack(s0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    project();
    guard_definiteness();
    return info(rows);
  }

  LsDremStepInfo<N> advance_one(const VecN& psi, double Y, double dt) {
    return advance({Row{psi, Y}}, dt);
  }

  /// Mixing: Delta = det(I - z f0 F) and
  /// Yvec = adj(I - z f0 F) (G0hat - z f0 F G0hat(0)).
  std::pair<double, VecN> mixed() const {
    const MatN B = MatN::Identity() - z_ * cfg_.f0 * F_;
    return {B.determinant(), VecN(adjugate<N>(B) * (G0_ - z_ * cfg_.f0 * F_ * G0_init_))};
  }

  const LsDremConfig<N>& config() const { return cfg_; }
  const VecN& G0hat() const { return G0_; }
  const MatN& F() const { return F_; }
  double z() const { return z_; }
  double theta1() const { return th1_; }
  double theta2() const { return th2_; }
  bool projection_active() const { return projected_; }
  double norm_F() const { return spectral_norm(F_); }

 private:
  // packed state layout: [G0 (N), F (N*N, column-major), z, th1, th2]
  static constexpr int kDim = N + N * N + 3;
  using PackedState = Eigen::Matrix<double, kDim, 1>;

  PackedState pack() const {
    PackedState s;
    s.template segment<N>(0) = G0_;
    Eigen::Map<MatN>(s.data() + N) = F_;
    s(N + N * N) = z_;
    s(N + N * N + 1) = th1_;
    s(N + N * N + 2) = th2_;
    return s;
  }
  void unpack(const PackedState& s) {
    G0_ = s.template segment<N>(0);
    F_ = Eigen::Map<const MatN>(s.data() + N);
    z_ = s(N + N * N);
    th1_ = s(N + N * N + 1);
    th2_ = s(N + N * N + 2);
  }

  static double spectral_norm(const MatN& F) {
    // F stays symmetric, so the spectral norm is the largest |eigenvalue|.
    const auto ev = Eigen::SelfAdjointEigenSolver<MatN>(F).eigenvalues();
    return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
  }

  PackedState rhs(const PackedState& s, const std::vector<Row>& rows) const {
    const VecN G0 = s.template segment<N>(0);
    const MatN F = Eigen::Map<const MatN>(s.data() + N);
    const double z = s(N + N * N);
    const double th1 = s(N + N * N + 1);
    const double th2 = s(N + N * N + 2);

    const double chi = cfg_.chi0 * (1.0 - spectral_norm(F) / cfg_.k);
    MatN dF = chi * F;
    VecN dG0 = VecN::Zero();
    for (const Row& r : rows) {
      const VecN Fpsi = F * r.psi;
      dF -= cfg_.gain_ls * Fpsi * Fpsi.transpose();
      dG0 += cfg_.gain_ls * Fpsi * (r.Y - r.psi.dot(G0));
    }

    const MatN B = MatN::Identity() - z * cfg_.f0 * F;
    const double Delta = B.determinant();
    const VecN Yv = adjugate<N>(B) * (G0 - z * cfg_.f0 * F * G0_init_);

    PackedState ds;
    ds.template segment<N>(0) = dG0;
    Eigen::Map<MatN>(ds.data() + N) = dF;
    ds(N + N * N) = -chi * z;
    ds(N + N * N + 1) = cfg_.gain1 * Delta * (Yv(0) - Delta * th1);
    ds(N + N * N + 2) = cfg_.gain2 * Delta * (Yv(1) - Delta * th2);
    return ds;
  }

  void project() {
    projected_ = false;
    if (cfg_.theta2_sign * th2_ < cfg_.theta2_min) {
      th2_ = cfg_.theta2_sign * cfg_.theta2_min;
      projected_ = true;
    }
  }

  void guard_definiteness() const {
    const auto ev = Eigen::SelfAdjointEigenSolver<MatN>(F_).eigenvalues();
    if (ev.minCoeff() < -1e-10)
      throw std::runtime_error(
          "LsDremCore: covariance-like matrix lost positive definiteness");
  }

  LsDremStepInfo<N> info(const std::vector<Row>& rows) const {
    LsDremStepInfo<N> out;
    const auto [Delta, Yv] = mixed();
    out.Delta = Delta;
    out.Yvec = Yv;
    out.residual = 0.0;
    for (const Row& r : rows)
      out.residual = std::max(out.residual, std::abs(r.Y - r.psi.dot(G0_)));
    out.normF = norm_F();
    return out;
  }

  LsDremConfig<N> cfg_;
  VecN G0_;
  VecN G0_init_;
  MatN F_;
  double z_ = 1.0;
  double th1_ = 0.0;
  double th2_ = 1.0;
  bool projected_ = false;
};

}  // namespace sgobs

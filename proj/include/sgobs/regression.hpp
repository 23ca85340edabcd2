#pragma once

// Construction of the nonlinear regression that ties the measured squared
// current magnitude to the unknown parameter pair, plus the interval
// excitation monitor used to gate parameter-convergence claims.
//
// Two constructions are provided: a numeric one that probes the underlying
// quadratic form (valid for any stator resistance) and the closed-form
// zero-resistance expressions. Both yield Y = psi1' theta + psi2' G(theta).

#include "sgobs/observer_core.hpp"
#include "sgobs/types.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>
#include <vector>

namespace sgobs {

/// Quadratic monomial map G(theta) = (theta1^2, theta2^2, theta1*theta2).
inline Eigen::Vector3d g_map(double theta1, double theta2) {
  return Eigen::Vector3d(theta1 * theta1, theta2 * theta2, theta1 * theta2);
}

struct RegressorSample {
  double t = 0.0;
  double Y = 0.0;            ///< squared current magnitude y4^2
  Vec2 psi1 = Vec2::Zero();  ///< linear regressor
  Eigen::Vector3d psi2 = Eigen::Vector3d::Zero();  ///< quadratic regressor

  /// Stacked 5-dimensional regressor (psi1; psi2).
  Eigen::Matrix<double, 5, 1> stacked() const {
    Eigen::Matrix<double, 5, 1> s;
    s << psi1, psi2;
    return s;
  }

  double predict(double theta1, double theta2) const {
    return psi1.dot(Vec2(theta1, theta2)) + psi2.dot(g_map(theta1, theta2));
  }
};

namespace detail {

/// Squared current magnitude as a function of the candidate parameter pair,
/// assembled from the rotation parameterization, the W parameterization of
/// the internal voltages, and the stator current relation.
inline double y4sq_of_theta(double th1, double th2, double v1, const PmuSample& y,
                            const GenParams& p, const Mat2& W) {
  const double rho = v1 - y.y1;
  const double cv = std::cos(rho), sv = std::sin(rho);
  const double sin_d = cv * th1 + sv * th2;
  const double cos_d = cv * th2 - sv * th1;
  const Vec2 x34 = W * Vec2(th1, th2);
  const double eq = x34(0) - y.y2 * cos_d;
  const double ed = x34(1) - y.y2 * sin_d;
  const double det = p.R * p.R + p.Xdp * p.Xqp;
  const double iq = (p.R * eq - p.Xdp * ed) / det;
  const double id = (p.Xqp * eq + p.R * ed) / det;
  return iq * iq + id * id;
}

}  // namespace detail

/// Numeric regressor construction, valid for any stator resistance: probes
/// the quadratic form (whose constant term vanishes structurally) at five
/// parameter points and extracts the linear and quadratic coefficients.
/// The sample itself must satisfy the magnitude/power identity
/// y4^2 = (y5^2 + y6^2) / y2^2; anything else is not a PMU measurement.
inline RegressorSample regressor_numeric(double v1, const PmuSample& y,
                                         const GenParams& p) {
  if (y.y2 <= 0.0) throw std::invalid_argument("regressor_numeric: y2 must be positive");
  const double y4sq = y.y4 * y.y4;
  const double s2 = (y.y5 * y.y5 + y.y6 * y.y6) / (y.y2 * y.y2);
  if (std::abs(y4sq - s2) > 1e-6 * std::max(1.0, y4sq))
    throw std::runtime_error(
        "regressor_numeric: current magnitude disagrees with the power phasor "
        "(inconsistent measurements)");
  const Mat2 W = w_matrix(v1, y, p);
  auto q = [&](double t1, double t2) {
    return detail::y4sq_of_theta(t1, t2, v1, y, p, W);
  };
  const double qp1 = q(1.0, 0.0), qm1 = q(-1.0, 0.0);
  const double qp2 = q(0.0, 1.0), qm2 = q(0.0, -1.0);
  const double q11 = q(1.0, 1.0);

  RegressorSample s;
  s.t = y.t;
  s.Y = y4sq;
  s.psi1(0) = 0.5 * (qp1 - qm1);
  s.psi1(1) = 0.5 * (qp2 - qm2);
  s.psi2(0) = 0.5 * (qp1 + qm1);
  s.psi2(1) = 0.5 * (qp2 + qm2);
  s.psi2(2) = q11 - s.psi1(0) - s.psi1(1) - s.psi2(0) - s.psi2(1);
  return s;
}

/// Closed-form regressor for the zero-resistance case. Rejects R != 0; the
/// linear part is identically zero in this regime.
inline RegressorSample regressor_closed_form_R0(double v1, const PmuSample& y,
                                                const GenParams& p) {
  if (p.R != 0.0)
    throw std::invalid_argument("regressor_closed_form_R0: requires R = 0");
  if (y.y2 <= 0.0)
    throw std::invalid_argument("regressor_closed_form_R0: y2 must be positive");

  const double rho = v1 - y.y1;
  const double cv = std::cos(rho), sv = std::sin(rho);
  const double y2sq = y.y2 * y.y2;
  const double a1 = p.Xdp * y.y5 * cv - (p.Xdp * y.y6 + y2sq) * sv;
  const double a2 = p.Xdp * y.y5 * sv + (p.Xdp * y.y6 + y2sq) * cv;
  const double a3 = (p.Xqp * y.y6 + y2sq) * cv + p.Xqp * y.y5 * sv;
  const double a4 = (p.Xqp * y.y6 + y2sq) * sv - p.Xqp * y.y5 * cv;
  const double kd = 1.0 / (p.Xdp * p.Xdp);
  const double kq = 1.0 / (p.Xqp * p.Xqp);

  RegressorSample s;
  s.t = y.t;
  s.Y = y.y4 * y.y4;
  s.psi1.setZero();
  s.psi2(0) = kd * (a1 * a1 / y2sq + sv * sv * y2sq + 2.0 * a1 * sv) +
              kq * (a3 * a3 / y2sq + cv * cv * y2sq - 2.0 * a3 * cv);
  s.psi2(1) = kd * (a2 * a2 / y2sq + cv * cv * y2sq - 2.0 * a2 * cv) +
              kq * (a4 * a4 / y2sq + sv * sv * y2sq - 2.0 * a4 * sv);
  s.psi2(2) = 2.0 * (kd * (-a1 * cv + a2 * sv + a1 * a2 / y2sq - cv * sv * y2sq) +
                     kq * (-a4 * cv - a3 * sv + a3 * a4 / y2sq + cv * sv * y2sq));
  return s;
}

/// Running integral M(t) = int psi psi' ds with interval-excitation
/// detection: records the first time the smallest eigenvalue of M clears
/// the threshold delta.
template <int N>
class ExcitationMonitor {
 public:
  using VecN = Eigen::Matrix<double, N, 1>;
  using MatN = Eigen::Matrix<double, N, N>;

  explicit ExcitationMonitor(double delta = 1e-6) : delta_(delta) {
    if (delta <= 0.0) throw std::invalid_argument("ExcitationMonitor: delta must be positive");
    M_.setZero();
  }

  void add(double t, const VecN& psi) { add_rows(t, {psi}); }

  /// Accumulate several simultaneous rows, each weighted by the elapsed time
  /// since the previous call.
  void add_rows(double t, std::initializer_list<VecN> psis) {
    if (has_prev_) {
      const double dt = t - t_prev_;
      if (dt <= 0.0) throw std::invalid_argument("ExcitationMonitor: time must increase");
      for (const VecN& psi : psis) M_ += psi * psi.transpose() * dt;
    }
    t_prev_ = t;
    has_prev_ = true;
    min_eig_ = Eigen::SelfAdjointEigenSolver<MatN>(M_).eigenvalues().minCoeff();
    if (!excited_ && min_eig_ >= delta_) {
      excited_ = true;
      t_c_ = t;
    }
  }

  const MatN& gramian() const { return M_; }
  double min_eig() const { return min_eig_; }
  bool excited() const { return excited_; }
  double t_c() const { return t_c_; }

  /// Numerical rank of the accumulated Gramian.
  int rank(double rel_tol = 1e-12) const {
    const auto ev = Eigen::SelfAdjointEigenSolver<MatN>(M_).eigenvalues();
    const double cut = rel_tol * std::max(ev.maxCoeff(), 0.0);
    int r = 0;
    for (int i = 0; i < N; ++i)
      if (ev(i) > cut && ev(i) > 0.0) ++r;
    return r;
  }

 private:
  double delta_;
  MatN M_;
  double t_prev_ = 0.0;
  bool has_prev_ = false;
  bool excited_ = false;
  double t_c_ = -1.0;
  double min_eig_ = 0.0;
};

}  // namespace sgobs

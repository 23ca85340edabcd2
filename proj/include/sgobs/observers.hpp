#pragma once

// The two PMU-driven state observers and their shared estimate bookkeeping.
//
// Partial observer: needs only the mechanical power input. Recovers the
// initial-angle parameter from a filtered version of the internal-voltage
// identity and reconstructs all four machine states algebraically.
//
// Full observer: additionally consumes the field-voltage input. Builds two
// exact linear regression rows per measurement for the parameter vector
// (theta1, theta2, x3(0), x4(0)) and feeds them to the LS+DREM estimator;
// states are reconstructed from the converged parameter estimates.

#include "sgobs/drem.hpp"
#include "sgobs/machine.hpp"
#include "sgobs/observer_core.hpp"
#include "sgobs/regression.hpp"
#include "sgobs/types.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sgobs {

/// One line of the estimate log: time, estimated states, true states (when
/// available), componentwise errors.
struct EstimateRecord {
  double t = 0.0;
  double xh1 = 0.0, xh2 = 0.0, xh3 = 0.0, xh4 = 0.0;
  double x1 = 0.0, x2 = 0.0, x3 = 0.0, x4 = 0.0;
  double e1 = 0.0, e2 = 0.0, e3 = 0.0, e4 = 0.0;
};

struct StateEstimate {
  double x1 = 0.0, x2 = 0.0, x3 = 0.0, x4 = 0.0;
  ThetaTriple theta;
  bool degenerate = false;  ///< angle extraction held (vanishing arguments)
};

namespace detail {

inline double unwrap_near(double raw, double prev) {
  return raw + 2.0 * M_PI * std::round((prev - raw) / (2.0 * M_PI));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Partial-input observer
// ---------------------------------------------------------------------------

struct PartialObserverConfig {
  double eps_degenerate = 1e-12;  ///< both atan2 arguments below this -> hold
};

class PartialObserver {
 public:
  PartialObserver(const GenParams& p, const PartialObserverConfig& cfg = {})
      : p_(p), dc_(derive_consts(p)), cfg_(cfg) {}

  /// Advance the internal filters by dt with the given measurement and
  /// mechanical power held, then refresh the state estimate.
  StateEstimate step(const PmuSample& y, double u1, double dt) {
    if (y.y2 <= 0.0) throw std::invalid_argument("PartialObserver: y2 must be positive");
    integrate_filters(y, u1, dt);
    return estimate(y);
  }

  /// Estimate from the current filter states without advancing time.
  StateEstimate estimate(const PmuSample& y) {
    const WSignals w = w_signals(v_.v1, y, p_);
    const double num = xi_(1) - w.w3(1);
    const double den = w.w3(0) - xi_(0);
    StateEstimate est;
    if (std::abs(num) < cfg_.eps_degenerate && std::abs(den) < cfg_.eps_degenerate) {
      est.degenerate = true;  // no angle information yet; hold previous value
    } else {
      const double raw = std::atan2(num, den);
      theta0_ = have_theta0_ ? detail::unwrap_near(raw, theta0_) : raw;
      have_theta0_ = true;
    }
    est.theta = ThetaTriple::from_angle(theta0_);
    est.x1 = v_.v1 + theta0_;
    est.x2 = v_.v2;
    const Vec2 x34 = w_matrix(v_.v1, y, p_) * Vec2(est.theta.theta1, est.theta.theta2);
    est.x3 = x34(0);
    est.x4 = x34(1);
    return est;
  }

  /// Zero the extension and rebase the filter memory accordingly; used to
  /// bound open-loop integration drift on long noisy runs. The filtered
  /// signals are rotated into the new extension frame so the angle estimate
  /// stays continuous (up to the speed-transient of the restarted extension).
  void restart_extension() {
    xi_ = rot_cw(v_.v1) * xi_;
    if (have_theta0_) theta0_ += v_.v1;
    v_ = ExtensionState{};
  }

  const ExtensionState& extension() const { return v_; }
  const Vec2& xi() const { return xi_; }

 private:
  void integrate_filters(const PmuSample& y, double u1, double dt) {
    // states: (v1, v2, xi1, xi2); xi' = -a2 xi + b2 w1(v1)
    auto rhs = [&](const Eigen::Vector4d& s) {
      ExtensionState v{s(0), s(1)};
      const Vec2 dv = extension_rhs(v, u1, y.y4, y.y5, dc_);
      const WSignals w = w_signals(s(0), y, p_);
      Eigen::Vector4d ds;
      ds << dv(0), dv(1), -dc_.a2 * s(2) + dc_.b2 * w.w1(0),
          -dc_.a2 * s(3) + dc_.b2 * w.w1(1);
      return ds;
    };
    Eigen::Vector4d s;
    s << v_.v1, v_.v2, xi_(0), xi_(1);
    const Eigen::Vector4d k1 = rhs(s);
    const Eigen::Vector4d k2 = rhs(s + 0.5 * dt * k1);
    const Eigen::Vector4d k3 = rhs(s + 0.5 * dt * k2);
    const Eigen::Vector4d k4 = rhs(s + dt * k3);
    s += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    v_.v1 = s(0);
    v_.v2 = s(1);
    xi_ = s.tail<2>();
  }

  GenParams p_;
  DerivedConsts dc_;
  PartialObserverConfig cfg_;
  ExtensionState v_;
  Vec2 xi_ = Vec2::Zero();
  double theta0_ = 0.0;
  bool have_theta0_ = false;
};

// ---------------------------------------------------------------------------
// Full-input observer
// ---------------------------------------------------------------------------

struct FullObserverConfig {
  LsDremConfig<4> estimator;
  double ie_delta = 1e-3;       ///< excitation threshold on the 4-dim Gramian
  double ie_delta_quad = 1e-6;  ///< threshold for the monitored quadratic stack
};

/// Per-step diagnostic outputs of the full observer.
struct FullObserverLog {
  double t = 0.0;
  double th1 = 0.0, th2 = 0.0;
  double Delta = 0.0, z = 0.0, normF = 0.0, residual = 0.0;
  bool projected = false;
};

class FullObserver {
 public:
  FullObserver(const GenParams& p, const FullObserverConfig& cfg = {})
      : p_(p),
        dc_(derive_consts(p)),
        cfg_(cfg),
        est_(cfg.estimator),
        mon_(cfg.ie_delta),
        mon_quad_(cfg.ie_delta_quad) {
    theta0_ = std::atan2(cfg.estimator.theta_init(0), cfg.estimator.theta_init(1));
  }

  /// Register a new measurement: refresh the held regression rows from the
  /// current filter states (both evaluated at the sample instant) and update
  /// the excitation monitors.
  void on_sample(const PmuSample& y, double u2) {
    const Mat2 W = w_matrix(v_.v1, y, p_);
    Row a, b;
    a.psi << W(0, 0) - xi3_(0), W(0, 1) - xi3_(1), -r1_, 0.0;
    a.Y = zeta_;
    b.psi << W(1, 0) - xi4_(0), W(1, 1) - xi4_(1), 0.0, -r2_;
    b.Y = 0.0;
    rows_ = {a, b};
    have_rows_ = true;

    // re-anchoring on an already-registered sample (a restart landing between
    // fresh samples) must not advance the excitation clock twice
    if (y.t > last_mon_t_) {
      mon_.add_rows(y.t, {a.psi, b.psi});
      const RegressorSample rs = regressor_numeric(v_.v1, y, p_);
      mon_quad_.add(y.t, rs.stacked());
      last_mon_t_ = y.t;
    }
    (void)u2;
  }

  /// Advance filters and estimator by dt with measurement and inputs held.
  StateEstimate step(const PmuSample& y, double u1, double u2, double dt) {
    if (y.y2 <= 0.0) throw std::invalid_argument("FullObserver: y2 must be positive");
    if (!have_rows_) on_sample(y, u2);
    integrate_filters(y, u1, u2, dt);
    last_info_ = est_.advance(rows_, dt);
    return estimate(y);
  }

  StateEstimate estimate(const PmuSample& y) {
    StateEstimate est;
    if (last_info_.Delta != 0.0) {
      const double raw = std::atan2(est_.theta1(), est_.theta2());
      theta0_ = detail::unwrap_near(raw, theta0_);
    }  // while Delta == 0 the estimator carries no information: hold
    est.theta = ThetaTriple::from_angle(theta0_);
    est.x1 = v_.v1 + theta0_;
    est.x2 = v_.v2;
    const Vec2 x34 = w_matrix(v_.v1, y, p_) * Vec2(est_.theta1(), est_.theta2());
    est.x3 = x34(0);
    est.x4 = x34(1);
    return est;
  }

  /// Zero the extension and restart the parameter estimator (the regression
  /// anchor changes with the extension frame, so filter memory is dropped).
  void restart(const PmuSample& y, double u2) {
    v_ = ExtensionState{};
    xi3_.setZero();
    xi4_.setZero();
    zeta_ = 0.0;
    r1_ = r2_ = 1.0;
    est_ = LsDremCore<4>(cfg_.estimator);
    theta0_ = std::atan2(cfg_.estimator.theta_init(0), cfg_.estimator.theta_init(1));
    have_rows_ = false;
    on_sample(y, u2);
  }

  FullObserverLog log(double t) const {
    FullObserverLog l;
    l.t = t;
    l.th1 = est_.theta1();
    l.th2 = est_.theta2();
    l.Delta = last_info_.Delta;
    l.z = est_.z();
    l.normF = last_info_.normF;
    l.residual = last_info_.residual;
    l.projected = est_.projection_active();
    return l;
  }

  const ExcitationMonitor<4>& monitor() const { return mon_; }
  const ExcitationMonitor<5>& quad_monitor() const { return mon_quad_; }
  const LsDremCore<4>& estimator() const { return est_; }
  const ExtensionState& extension() const { return v_; }
  double theta0() const { return theta0_; }

 private:
  using Row = RegressionRow<4>;

  void integrate_filters(const PmuSample& y, double u1, double u2, double dt) {
    // states: (v1, v2, xi3(2), xi4(2), zeta, r1, r2)
    using V9 = Eigen::Matrix<double, 9, 1>;
    auto rhs = [&](const V9& s) {
      ExtensionState v{s(0), s(1)};
      const Vec2 dv = extension_rhs(v, u1, y.y4, y.y5, dc_);
      const WSignals w = w_signals(s(0), y, p_);
      V9 ds;
      ds(0) = dv(0);
      ds(1) = dv(1);
      ds.segment<2>(2) = -dc_.a1 * s.segment<2>(2) - dc_.b1 * w.w2;
      ds.segment<2>(4) = -dc_.a2 * s.segment<2>(4) + dc_.b2 * w.w1;
      ds(6) = -dc_.a1 * s(6) + dc_.a1 * u2;
      ds(7) = -dc_.a1 * s(7);
      ds(8) = -dc_.a2 * s(8);
      return ds;
    };
    V9 s;
    s << v_.v1, v_.v2, xi3_(0), xi3_(1), xi4_(0), xi4_(1), zeta_, r1_, r2_;
    const V9 k1 = rhs(s);
    const V9 k2 = rhs(s + 0.5 * dt * k1);
    const V9 k3 = rhs(s + 0.5 * dt * k2);
    const V9 k4 = rhs(s + dt * k3);
    s += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    v_.v1 = s(0);
    v_.v2 = s(1);
    xi3_ = s.segment<2>(2);
    xi4_ = s.segment<2>(4);
    zeta_ = s(6);
    r1_ = s(7);
    r2_ = s(8);
  }

  GenParams p_;
  DerivedConsts dc_;
  FullObserverConfig cfg_;
  ExtensionState v_;
  Vec2 xi3_ = Vec2::Zero();  ///< filtered -b1*w2 (x3 forcing memory)
  Vec2 xi4_ = Vec2::Zero();  ///< filtered +b2*w1 (x4 forcing memory)
  double zeta_ = 0.0;        ///< filtered field-voltage forcing
  double r1_ = 1.0;          ///< initial-condition decay, x3 channel
  double r2_ = 1.0;          ///< initial-condition decay, x4 channel
  LsDremCore<4> est_;
  ExcitationMonitor<4> mon_;
  ExcitationMonitor<5> mon_quad_;
  double last_mon_t_ = -std::numeric_limits<double>::infinity();
  std::vector<Row> rows_;
  bool have_rows_ = false;
  LsDremStepInfo<4> last_info_;
  double theta0_ = 0.0;
};

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

struct ChannelMetrics {
  double rmse = 0.0;
  double settling_time = -1.0;  ///< first time after which |e| stays < tol; -1 if never
  double max_after = 0.0;       ///< max |e| from the metric window start
};

struct ErrorMetrics {
  ChannelMetrics ch[4];
  double window_start = 0.0;
  double tol = 1e-3;
};

inline ErrorMetrics error_metrics(const std::vector<EstimateRecord>& recs,
                                  double window_start = 0.0, double tol = 1e-3) {
  if (recs.empty()) throw std::invalid_argument("error_metrics: empty record list");
  ErrorMetrics m;
  m.window_start = window_start;
  m.tol = tol;
  for (int c = 0; c < 4; ++c) {
    double sumsq = 0.0;
    std::size_t n = 0;
    double max_after = 0.0;
    for (const auto& r : recs) {
      if (r.t < window_start) continue;
      const double e = (&r.e1)[c];
      sumsq += e * e;
      ++n;
      max_after = std::max(max_after, std::abs(e));
    }
    m.ch[c].rmse = n ? std::sqrt(sumsq / (double)n) : 0.0;
    m.ch[c].max_after = max_after;

    // settling time: time of the first record after the last tolerance hit
    std::ptrdiff_t last_bad = -1;
    for (std::ptrdiff_t i = (std::ptrdiff_t)recs.size() - 1; i >= 0; --i) {
      if (std::abs((&recs[(std::size_t)i].e1)[c]) >= tol) {
        last_bad = i;
        break;
      }
    }
    if (last_bad + 1 >= (std::ptrdiff_t)recs.size())
      m.ch[c].settling_time = -1.0;  // still violating at the end
    else
      m.ch[c].settling_time = recs[(std::size_t)(last_bad + 1)].t;
  }
  return m;
}

}  // namespace sgobs

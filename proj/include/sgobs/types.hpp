#pragma once

// Core value types shared across the library: machine parameters, derived
// model constants, plant/observer state vectors and PMU samples.
//
// Conventions: all electrical quantities are in per-unit on the machine base,
// angles in radians, time in seconds. The rotor-frame d/q components are
// always carried as (q, d) pairs to match the model's vector ordering.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace sgobs {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// One (q, d) component pair in the rotor reference frame.
struct DqPair {
  double q = 0.0;
  double d = 0.0;

  Vec2 vec() const { return Vec2(q, d); }
  static DqPair from_vec(const Vec2& v) { return {v(0), v(1)}; }
};

/// Synchronous generator parameters (two-axis model) plus the excitation
/// system constants used by the closed-loop plant.
struct GenParams {
  // mechanical / electrical machine constants
  double H = 3.5;       ///< inertia constant [s]
  double D = 0.01;      ///< damping factor [pu]
  double Td0p = 8.0;    ///< d-axis transient open-circuit time constant [s]
  double Tq0p = 0.4;    ///< q-axis transient open-circuit time constant [s]
  double Xd = 1.8;      ///< d-axis synchronous reactance [pu]
  double Xdp = 0.3;     ///< d-axis transient reactance [pu]
  double Xq = 1.7;      ///< q-axis synchronous reactance [pu]
  double Xqp = 0.55;    ///< q-axis transient reactance [pu]
  double R = 0.003;     ///< stator resistance [pu]
  double w0 = 2.0 * M_PI * 60.0;  ///< synchronous speed [rad/s]

  // voltage regulator (transient-gain-reduction type)
  double KA = 100.0;    ///< regulator gain
  double TA = 0.05;     ///< regulator time constant [s]
  double TB = 10.0;     ///< lag time constant [s]
  double TC = 1.0;      ///< lead time constant [s]
  double Vref = 1.0;    ///< voltage setpoint [pu] (overwritten by equilibrium init)

  // power system stabilizer (washout + double lead-lag on rotor speed)
  double Kp = 0.0;      ///< stabilizer gain (0 disables the output path)
  double Tw = 10.0;     ///< washout time constant [s]
  double T1 = 0.05;
  double T2 = 0.02;
  double T3 = 3.0;
  double T4 = 5.4;

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("GenParams: ") + what);
    };
    req(H > 0.0, "H must be positive");
    req(Td0p > 0.0, "Td0p must be positive");
    req(Tq0p > 0.0, "Tq0p must be positive");
    req(w0 > 0.0, "w0 must be positive");
    req(D >= 0.0, "D must be nonnegative");
    req(R >= 0.0, "R must be nonnegative");
    req(Xd >= Xdp, "Xd must not be below Xdp");
    req(Xq >= Xqp, "Xq must not be below Xqp");
    req(R * R + Xdp * Xqp > 0.0, "singular machine: R=0 and Xdp*Xqp=0");
    req(TA > 0.0 && TB > 0.0 && TC > 0.0, "AVR time constants must be positive");
    req(Tw > 0.0 && T1 > 0.0 && T2 > 0.0 && T3 > 0.0 && T4 > 0.0,
        "PSS time constants must be positive");
    req(KA > 0.0, "KA must be positive");
  }
};

/// Constants of the rearranged state equations, precomputed once per machine.
struct DerivedConsts {
  double a0 = 0.0;  ///< D*w0 / (2H)
  double a1 = 0.0;  ///< 1 / Td0p
  double a2 = 0.0;  ///< 1 / Tq0p
  double b0 = 0.0;  ///< w0 / (2H)
  double b1 = 0.0;  ///< (Xd - Xdp) / Td0p
  double b2 = 0.0;  ///< (Xq - Xqp) / Tq0p
  double b3 = 0.0;  ///< w0*R / (2H)

  // stabilizer realization constants (state-space form of the transfer function)
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
};

inline DerivedConsts derive_consts(const GenParams& p) {
  p.validate();
  DerivedConsts dc;
  dc.a0 = p.D * p.w0 / (2.0 * p.H);
  dc.a1 = 1.0 / p.Td0p;
  dc.a2 = 1.0 / p.Tq0p;
  dc.b0 = p.w0 / (2.0 * p.H);
  dc.b1 = (p.Xd - p.Xdp) / p.Td0p;
  dc.b2 = (p.Xq - p.Xqp) / p.Tq0p;
  dc.b3 = p.w0 * p.R / (2.0 * p.H);
  const double TwT4T2 = p.Tw * p.T4 * p.T2;
  dc.c1 = (p.T4 * p.Tw + p.T4 * p.T2 + p.T2 * p.Tw) / TwT4T2;
  dc.c2 = (p.Tw + p.T4 + p.T2) / TwT4T2;
  dc.c3 = p.Kp * p.T1 * p.T3 / (p.T2 * p.T4);
  dc.c4 = p.Kp * (p.T1 + p.T3) / (p.T2 * p.T4);
  dc.c5 = p.Kp / (p.T2 * p.T4);
  return dc;
}

/// Full per-generator dynamic state: the four machine states, the two AVR
/// states and the three stabilizer states.
struct PlantState {
  double x1 = 0.0;  ///< rotor angle [rad]
  double x2 = 0.0;  ///< rotor speed deviation [rad/s]
  double x3 = 0.0;  ///< q-axis internal voltage E_q' [pu]
  double x4 = 0.0;  ///< d-axis internal voltage E_d' [pu]
  double q = 0.0;   ///< AVR lag state
  double Ef = 0.0;  ///< field voltage [pu]
  double p1 = 0.0;  ///< PSS states
  double p2 = 0.0;
  double p3 = 0.0;

  static constexpr int kDim = 9;

  Eigen::Matrix<double, 9, 1> vec() const {
    Eigen::Matrix<double, 9, 1> v;
    v << x1, x2, x3, x4, q, Ef, p1, p2, p3;
    return v;
  }
  static PlantState from_vec(const Eigen::Matrix<double, 9, 1>& v) {
    PlantState s;
    s.x1 = v(0); s.x2 = v(1); s.x3 = v(2); s.x4 = v(3);
    s.q = v(4); s.Ef = v(5); s.p1 = v(6); s.p2 = v(7); s.p3 = v(8);
    return s;
  }
};

/// One synchrophasor measurement record.
///
/// y1: voltage phase [rad], y2: voltage magnitude [pu], y3: current phase
/// [rad], y4: current magnitude [pu], y5: active power [pu], y6: reactive
/// power [pu]. Power components are always kept consistent with the phasors:
/// y5 = y2*y4*cos(y1-y3), y6 = y2*y4*sin(y1-y3).
struct PmuSample {
  double t = 0.0;
  double y1 = 0.0;
  double y2 = 1.0;
  double y3 = 0.0;
  double y4 = 0.0;
  double y5 = 0.0;
  double y6 = 0.0;
};

/// The three constant parameters recovered by the observers:
/// theta0 = x1(0) + x2(0)/a0 and its sine/cosine pair.
struct ThetaTriple {
  double theta0 = 0.0;
  double theta1 = 0.0;  ///< sin(theta0)
  double theta2 = 1.0;  ///< cos(theta0)

  static ThetaTriple from_angle(double angle) {
    return {angle, std::sin(angle), std::cos(angle)};
  }

  void validate() const {
    const double n = theta1 * theta1 + theta2 * theta2;
    if (std::abs(n - 1.0) > 1e-9)
      throw std::invalid_argument("ThetaTriple: (theta1, theta2) must lie on the unit circle");
  }
};

/// 2x2 skew generator of planar rotations; exp(J*a) rotates by +a.
inline Mat2 rot_ccw(double a) {
  Mat2 m;
  m << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return m;
}

/// exp(-J*a): the transpose/inverse of rot_ccw.
inline Mat2 rot_cw(double a) {
  Mat2 m;
  m << std::cos(a), std::sin(a), -std::sin(a), std::cos(a);
  return m;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  return a;
}

}  // namespace sgobs

#pragma once

// Algebraic relations of the two-axis generator model: rotor-frame voltage
// and current maps, air-gap power, assembly of PMU samples from machine
// quantities, and the 9-state right-hand side of one generator with its
// excitation system.

#include "sgobs/types.hpp"

#include <cmath>
#include <stdexcept>

namespace sgobs {

/// Terminal-voltage components in the rotor frame from the measured phasor:
/// V_q = y2*cos(x1-y1), V_d = y2*sin(x1-y1).
inline DqPair dq_voltages(double x1, double y1, double y2) {
  const double delta = x1 - y1;
  return {y2 * std::cos(delta), y2 * std::sin(delta)};
}

/// Stator currents from the internal voltages, inverting the stator algebra:
/// [Iq; Id] = 1/(R^2 + Xdp*Xqp) * [[R, -Xdp], [Xqp, R]] * [x3 - Vq; x4 - Vd].
inline DqPair currents_from_internal(double x1, double x3, double x4,
                                     double y1, double y2, const GenParams& p) {
  const double det = p.R * p.R + p.Xdp * p.Xqp;
  if (det <= 0.0)
    throw std::invalid_argument("currents_from_internal: singular machine (R=0 and Xdp*Xqp=0)");
  const DqPair v = dq_voltages(x1, y1, y2);
  const double eq = x3 - v.q;
  const double ed = x4 - v.d;
  return {(p.R * eq - p.Xdp * ed) / det, (p.Xqp * eq + p.R * ed) / det};
}

/// Stator currents from measured power flow:
/// [Iq; Id] = (1/y2) * exp(J*(x1-y1)) * [y5; y6].
inline DqPair currents_from_power(double x1, const PmuSample& y) {
  if (y.y2 <= 0.0)
    throw std::invalid_argument("currents_from_power: y2 must be positive");
  const Vec2 i = rot_ccw(x1 - y.y1) * Vec2(y.y5, y.y6) / y.y2;
  return DqPair::from_vec(i);
}

/// Terminal voltages from internal voltages and currents (stator equation):
/// [Vq; Vd] = [x3; x4] - [[R, Xdp], [-Xqp, R]] * [Iq; Id].
inline DqPair voltages_from_internal(double x3, double x4, const DqPair& i,
                                     const GenParams& p) {
  return {x3 - p.R * i.q - p.Xdp * i.d, x4 + p.Xqp * i.q - p.R * i.d};
}

/// Electric air-gap power P_e = x3*Iq + x4*Id + (Xqp - Xdp)*Id*Iq.
inline double air_gap_power(double x3, double x4, const DqPair& i, const GenParams& p) {
  return x3 * i.q + x4 * i.d + (p.Xqp - p.Xdp) * i.d * i.q;
}

/// Assemble a full PMU sample from rotor angle and rotor-frame terminal
/// quantities. Voltage and current phasors are referred to the network frame;
/// power components follow from the phasor pair.
inline PmuSample pmu_from_machine(double t, double x1, const DqPair& v, const DqPair& i) {
  PmuSample y;
  y.t = t;
  y.y2 = std::hypot(v.q, v.d);
  y.y1 = x1 - std::atan2(v.d, v.q);
  y.y4 = std::hypot(i.q, i.d);
  y.y5 = v.q * i.q + v.d * i.d;
  y.y6 = v.q * i.d - v.d * i.q;
  y.y3 = y.y1 - std::atan2(y.y6, y.y5);
  return y;
}

/// Machine-state derivatives written in terms of the measured quantities,
/// with u1 the mechanical power and u2 the field voltage:
///   x1' = x2
///   x2' = -a0*x2 + b0*(u1 - y5) - b3*y4^2
///   x3' = -a1*x3 - (b1/y2)*(sin(d)*y5 + cos(d)*y6) + a1*u2,  d = x1 - y1
///   x4' = -a2*x4 + (b2/y2)*(cos(d)*y5 - sin(d)*y6)
inline Eigen::Vector4d machine_rhs(double x1, double x2, double x3, double x4,
                                   double u1, double u2, const PmuSample& y,
                                   const DerivedConsts& dc) {
  const double d = x1 - y.y1;
  const double sd = std::sin(d), cd = std::cos(d);
  Eigen::Vector4d dx;
  dx(0) = x2;
  dx(1) = -dc.a0 * x2 + dc.b0 * (u1 - y.y5) - dc.b3 * y.y4 * y.y4;
  dx(2) = -dc.a1 * x3 - dc.b1 / y.y2 * (sd * y.y5 + cd * y.y6) + dc.a1 * u2;
  dx(3) = -dc.a2 * x4 + dc.b2 / y.y2 * (cd * y.y5 - sd * y.y6);
  return dx;
}

/// Full 9-state derivative of one generator: machine states with the field
/// voltage supplied by the AVR state, plus AVR and stabilizer dynamics driven
/// by the measured terminal-voltage magnitude.
inline Eigen::Matrix<double, 9, 1> plant_rhs(const PlantState& s, double u1,
                                             const PmuSample& y,
                                             const GenParams& p,
                                             const DerivedConsts& dc) {
  if (y.y2 <= 0.0)
    throw std::invalid_argument("plant_rhs: y2 must be positive");

  const double Vpss = s.p1 + dc.c3 * s.x2;
  const double e = p.Vref - y.y2 + Vpss;

  Eigen::Matrix<double, 9, 1> ds;
  ds.head<4>() = machine_rhs(s.x1, s.x2, s.x3, s.x4, u1, s.Ef, y, dc);
  // AVR: lead-lag (TC/TB) followed by first-order regulator
  ds(4) = ((1.0 - p.TC / p.TB) * e - s.q) / p.TB;
  ds(5) = (p.KA * (s.q + (p.TC / p.TB) * e) - s.Ef) / p.TA;
  // stabilizer state-space realization
  ds(6) = -dc.c1 * s.p1 + s.p2 + (dc.c4 - dc.c1 * dc.c3) * s.x2;
  ds(7) = -dc.c2 * s.p1 + s.p3 + (dc.c5 - dc.c2 * dc.c3) * s.x2;
  ds(8) = -s.p1 - dc.c1 * dc.c3 * s.x2;
  return ds;
}

}  // namespace sgobs

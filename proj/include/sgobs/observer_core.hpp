#pragma once

// Shared observer machinery: the two-state dynamic extension that reproduces
// the rotor-angle increment from measured power, the rotation that maps the
// unknown initial-angle parameters onto sin/cos of the load angle, the 2x2
// linear parameterization of the internal voltages, and the w-signals used
// by the reduced-input observer.

#include "sgobs/types.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

namespace sgobs {

/// States of the dynamic extension; starts from exactly (0, 0).
struct ExtensionState {
  double v1 = 0.0;
  double v2 = 0.0;
};

/// v1' = v2, v2' = -a0 v2 + b0 (u1 - y5) - b3 y4^2 — a copy of the speed
/// dynamics driven purely by measured quantities, so that x1 - v1 is a
/// constant (up to an exponentially vanishing transient).
inline Vec2 extension_rhs(const ExtensionState& v, double u1, double y4, double y5,
                          const DerivedConsts& dc) {
  return Vec2(v.v2, -dc.a0 * v.v2 + dc.b0 * (u1 - y5) - dc.b3 * y4 * y4);
}

/// Rotation exp(-J*(v1-y1)) that carries the constant parameter pair
/// (sin(theta0), cos(theta0)) onto (sin(x1-y1), cos(x1-y1)).
inline Mat2 rotation(double v1, double y1) { return rot_cw(v1 - y1); }

/// Linear parameterization of the internal voltages:
/// [x3; x4] = W * [theta1; theta2] with
/// W = (1/y2) [[-R y6 + Xdp y5, R y5 + Xdp y6 + y2^2],
///             [ R y5 + Xqp y6 + y2^2, R y6 - Xqp y5]] * exp(-J*(v1-y1)).
inline Mat2 w_matrix(double v1, const PmuSample& y, const GenParams& p) {
  if (y.y2 <= 0.0) throw std::invalid_argument("w_matrix: y2 must be positive");
  Mat2 m;
  m << -p.R * y.y6 + p.Xdp * y.y5, p.R * y.y5 + p.Xdp * y.y6 + y.y2 * y.y2,
       p.R * y.y5 + p.Xqp * y.y6 + y.y2 * y.y2, p.R * y.y6 - p.Xqp * y.y5;
  return (1.0 / y.y2) * m * rotation(v1, y.y1);
}

struct WSignals {
  Vec2 w1;  ///< w1' theta = Iq
  Vec2 w2;  ///< w2' theta = Id
  Vec2 w3;  ///< w3' theta = x4 (second row of the W parameterization)
};

/// Measured signal triple of the reduced-input observer:
/// w1 = (1/y2) exp(J r) [-y6; y5], w2 = (1/y2) exp(J r) [y5; y6],
/// w3 = exp(J r) [y2; 0] - Xqp w1 + R w2, with r = v1 - y1.
inline WSignals w_signals(double v1, const PmuSample& y, const GenParams& p) {
  if (y.y2 <= 0.0) throw std::invalid_argument("w_signals: y2 must be positive");
  const Mat2 rot = rot_ccw(v1 - y.y1);
  WSignals w;
  w.w1 = rot * Vec2(-y.y6, y.y5) / y.y2;
  w.w2 = rot * Vec2(y.y5, y.y6) / y.y2;
  w.w3 = rot * Vec2(y.y2, 0.0) - p.Xqp * w.w1 + p.R * w.w2;
  return w;
}

}  // namespace sgobs

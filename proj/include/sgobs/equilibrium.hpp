#pragma once

// Equilibrium initialization: solve for the steady state of the closed loop
// at a given dispatch (terminal active power, terminal voltage magnitude),
// then back out the exciter setpoint and states so that every derivative of
// the plant is analytically zero at t = 0.

#include "sgobs/machine.hpp"
#include "sgobs/network.hpp"
#include "sgobs/types.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace sgobs {

struct Dispatch {
  double P = 0.8;  ///< terminal active power [pu]
  double V = 1.0;  ///< terminal voltage magnitude [pu]
};

struct GenEquilibrium {
  PlantState state;   ///< all 9 states at rest (x2 = 0, PSS states 0)
  GenParams params;   ///< input parameters with Vref overwritten
  double u1 = 0.0;    ///< mechanical power input balancing the air-gap power
  PmuSample y;        ///< terminal measurement at equilibrium
};

namespace detail {

/// Damped Newton with forward-difference Jacobian and backtracking line
/// search on the residual norm.
inline Eigen::VectorXd damped_newton(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& resid,
    Eigen::VectorXd u, double tol = 1e-13, int max_iter = 100) {
  const int n = (int)u.size();
  Eigen::VectorXd r = resid(u);
  for (int it = 0; it < max_iter; ++it) {
    if (r.lpNorm<Eigen::Infinity>() < tol) return u;
    Eigen::MatrixXd J(n, n);
    for (int j = 0; j < n; ++j) {
      const double eps = 1e-7 * std::max(1.0, std::abs(u(j)));
      Eigen::VectorXd up = u;
      up(j) += eps;
      J.col(j) = (resid(up) - r) / eps;
    }
    const Eigen::VectorXd du = J.partialPivLu().solve(-r);
    if (!du.allFinite()) throw std::runtime_error("equilibrium: singular Jacobian");
    double alpha = 1.0;
    for (int bt = 0; bt < 30; ++bt) {
      const Eigen::VectorXd ut = u + alpha * du;
      const Eigen::VectorXd rt = resid(ut);
      if (rt.allFinite() && rt.norm() < r.norm()) {
        u = ut;
        r = rt;
        break;
      }
      alpha *= 0.5;
      if (bt == 29) throw std::runtime_error("equilibrium: line search failed");
    }
  }
  if (r.lpNorm<Eigen::Infinity>() >= tol)
    throw std::runtime_error("equilibrium: Newton iteration did not converge");
  return u;
}

/// Fill the non-machine states and setpoints once (x1, x3, x4) are known.
inline GenEquilibrium finish_equilibrium(double x1, double x3, double x4,
                                         const GenParams& p, const NetworkSolution& ns) {
  GenEquilibrium eq;
  eq.params = p;
  eq.state.x1 = x1;
  eq.state.x2 = 0.0;
  eq.state.x3 = x3;
  eq.state.x4 = x4;
  eq.state.Ef = x3 + (p.Xd - p.Xdp) * ns.i.d;
  eq.u1 = air_gap_power(x3, x4, ns.i, p);
  // AVR rest: e = Ef/KA, q = (1 - TC/TB) e, and Vref makes e consistent.
  const double e = eq.state.Ef / p.KA;
  eq.state.q = (1.0 - p.TC / p.TB) * e;
  eq.params.Vref = ns.y.y2 + e;
  eq.state.p1 = eq.state.p2 = eq.state.p3 = 0.0;
  eq.y = ns.y;
  return eq;
}

}  // namespace detail

/// Equilibrium of a single machine against the infinite bus.
inline GenEquilibrium equilibrium_smib(const GenParams& p, const SmibNetwork& net,
                                       const Dispatch& d, double load_scale = 1.0) {
  p.validate();
  net.validate();
  auto resid = [&](const Eigen::VectorXd& u) {
    const NetworkSolution ns = solve_smib(u(0), u(1), u(2), p, net, load_scale);
    Eigen::VectorXd r(3);
    r(0) = -u(2) + (p.Xq - p.Xqp) * ns.i.q;  // x4 stationarity
    r(1) = ns.y.y2 - d.V;
    r(2) = ns.y.y5 - d.P;
    return r;
  };
  Eigen::VectorXd u0(3);
  u0 << 0.3, 1.0, 0.3;
  const Eigen::VectorXd u = detail::damped_newton(resid, u0);
  const NetworkSolution ns = solve_smib(u(0), u(1), u(2), p, net, load_scale);
  return detail::finish_equilibrium(u(0), u(1), u(2), p, ns);
}

/// Joint equilibrium of all machines of a multimachine network.
inline std::vector<GenEquilibrium> equilibrium_multimachine(
    const std::vector<GenParams>& params, const MultiMachineNetwork& net,
    const std::vector<Dispatch>& dispatch, const std::vector<double>& load_scale) {
  net.validate();
  const int ng = (int)net.gen_bus.size();
  if ((int)params.size() != ng || (int)dispatch.size() != ng)
    throw std::invalid_argument("equilibrium_multimachine: size mismatch");

  auto unpack = [&](const Eigen::VectorXd& u, std::vector<double>& x1,
                    std::vector<double>& x3, std::vector<double>& x4) {
    x1.resize(ng); x3.resize(ng); x4.resize(ng);
    for (int g = 0; g < ng; ++g) {
      x1[g] = u(3 * g);
      x3[g] = u(3 * g + 1);
      x4[g] = u(3 * g + 2);
    }
  };
  auto resid = [&](const Eigen::VectorXd& u) {
    std::vector<double> x1, x3, x4;
    unpack(u, x1, x3, x4);
    const MultiMachineSolution sol = solve_multimachine(x1, x3, x4, params, net, load_scale);
    Eigen::VectorXd r(3 * ng);
    for (int g = 0; g < ng; ++g) {
      r(3 * g) = -x4[g] + (params[g].Xq - params[g].Xqp) * sol.gen[g].i.q;
      r(3 * g + 1) = sol.gen[g].y.y2 - dispatch[g].V;
      r(3 * g + 2) = sol.gen[g].y.y5 - dispatch[g].P;
    }
    return r;
  };

  Eigen::VectorXd u0(3 * ng);
  for (int g = 0; g < ng; ++g) {
    u0(3 * g) = 0.3;
    u0(3 * g + 1) = 1.0;
    u0(3 * g + 2) = 0.3;
  }
  const Eigen::VectorXd u = detail::damped_newton(resid, u0);

  std::vector<double> x1, x3, x4;
  unpack(u, x1, x3, x4);
  const MultiMachineSolution sol = solve_multimachine(x1, x3, x4, params, net, load_scale);
  std::vector<GenEquilibrium> out;
  out.reserve(ng);
  for (int g = 0; g < ng; ++g)
    out.push_back(detail::finish_equilibrium(x1[g], x3[g], x4[g], params[g], sol.gen[g]));
  return out;
}

}  // namespace sgobs

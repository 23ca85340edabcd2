#pragma once

// Network solvers that close the stator algebra against an external grid:
// a single-machine-infinite-bus reduction and a general multimachine linear
// network with constant-impedance loads.

#include "sgobs/machine.hpp"
#include "sgobs/types.hpp"

#include <complex>
#include <stdexcept>
#include <vector>

namespace sgobs {

using Complex = std::complex<double>;

/// Infinite bus behind a series line, with an optional constant-impedance
/// load at the machine terminal bus (admittance Gl + j*Bl, scaled by the
/// load-fluctuation process).
struct SmibNetwork {
  double Vinf = 1.0;   ///< infinite-bus voltage magnitude [pu]
  double thinf = 0.0;  ///< infinite-bus angle [rad]
  double Re = 0.01;    ///< line resistance [pu]
  double Xe = 0.3;     ///< line reactance [pu]
  double Gl = 0.0;     ///< terminal-bus load conductance [pu]
  double Bl = 0.0;     ///< terminal-bus load susceptance [pu]

  void validate() const {
    if (Vinf <= 0.0) throw std::invalid_argument("SmibNetwork: Vinf must be positive");
    if (Re < 0.0) throw std::invalid_argument("SmibNetwork: Re must be nonnegative");
    if (Xe <= 0.0) throw std::invalid_argument("SmibNetwork: Xe must be positive");
  }
};

struct NetworkSolution {
  DqPair v;     ///< terminal voltage, rotor frame
  DqPair i;     ///< stator current, rotor frame
  PmuSample y;  ///< assembled measurement (t left at 0; caller stamps it)
};

/// Solve the terminal quantities of one machine against the infinite bus.
///
/// The terminal load (if any) is absorbed by a Thevenin reduction of the
/// line + load seen from the machine terminals, so the solve keeps the same
/// 2x2 structure as the stator equation:
///   [x3 - Vth*cos(x1-thth); x4 - Vth*sin(x1-thth)]
///     = [[R+Rth, Xdp+Xth], [-(Xqp+Xth), R+Rth]] * [Iq; Id].
/// With zero load this is exactly the line-only relation.
inline NetworkSolution solve_smib(double x1, double x3, double x4,
                                  const GenParams& p, const SmibNetwork& n,
                                  double load_scale = 1.0) {
  const Complex Ze(n.Re, n.Xe);
  const Complex yL(n.Gl * load_scale, n.Bl * load_scale);
  const Complex den = 1.0 + yL * Ze;
  if (std::abs(den) < 1e-12)
    throw std::runtime_error("solve_smib: degenerate terminal load (resonant with line)");
  const Complex Vth_c = std::polar(n.Vinf, n.thinf) / den;
  const Complex Zth = Ze / den;

  const double Vth = std::abs(Vth_c);
  const double thth = std::arg(Vth_c);
  const double Rt = p.R + Zth.real();
  const double Xt_d = p.Xdp + Zth.imag();
  const double Xt_q = p.Xqp + Zth.imag();

  Mat2 A;
  A << Rt, Xt_d, -Xt_q, Rt;
  const double det = A.determinant();
  if (std::abs(det) < 1e-14)
    throw std::runtime_error("solve_smib: singular network matrix");

  const double d = x1 - thth;
  const Vec2 b(x3 - Vth * std::cos(d), x4 - Vth * std::sin(d));
  const Vec2 iqd = A.inverse() * b;

  NetworkSolution sol;
  sol.i = DqPair::from_vec(iqd);
  sol.v = voltages_from_internal(x3, x4, sol.i, p);
  sol.y = pmu_from_machine(0.0, x1, sol.v, sol.i);
  return sol;
}

/// One series branch between two buses. Stored in impedance form, exactly as
/// authored in configuration files, so serialization round-trips bit for bit;
/// the admittance is derived where the network matrix is assembled.
struct Line {
  int from = 0;
  int to = 0;
  Complex z;  ///< series impedance [pu]
};

/// Linear multimachine network: series lines, constant-impedance loads, one
/// optional infinite-bus tie, and one generator per entry of gen_bus.
struct MultiMachineNetwork {
  int n_bus = 0;
  std::vector<Line> lines;
  std::vector<Complex> loads;   ///< per-bus load admittance (size n_bus)
  std::vector<int> gen_bus;     ///< terminal bus of each generator
  int inf_bus = -1;             ///< bus tied to the external source, -1 if none
  Complex z_inf = 0.0;          ///< tie impedance
  double Vinf = 1.0;
  double thinf = 0.0;

  void validate() const {
    if (n_bus <= 0) throw std::invalid_argument("MultiMachineNetwork: n_bus must be positive");
    if ((int)loads.size() != n_bus)
      throw std::invalid_argument("MultiMachineNetwork: loads size must equal n_bus");
    for (const auto& l : lines) {
      if (l.from < 0 || l.from >= n_bus || l.to < 0 || l.to >= n_bus || l.from == l.to)
        throw std::invalid_argument("MultiMachineNetwork: line endpoints out of range");
      if (l.z == Complex(0.0, 0.0))
        throw std::invalid_argument("MultiMachineNetwork: line impedance must be nonzero");
    }
    if (inf_bus >= 0 && z_inf == Complex(0.0, 0.0))
      throw std::invalid_argument("MultiMachineNetwork: tie impedance must be nonzero");
    for (int g : gen_bus)
      if (g < 0 || g >= n_bus)
        throw std::invalid_argument("MultiMachineNetwork: generator bus out of range");
    if (inf_bus >= n_bus)
      throw std::invalid_argument("MultiMachineNetwork: infinite bus out of range");
  }
};

namespace detail {

/// Real 2x2 block of a complex scalar acting on (Re, Im) component vectors.
inline Mat2 blk(const Complex& z) {
  Mat2 m;
  m << z.real(), -z.imag(), z.imag(), z.real();
  return m;
}

/// Frame map C(x1): rotor-frame (q, d) components -> network-frame (Re, Im)
/// phasor components. Involutory reflection: C = C^T, C*C = I.
inline Mat2 frame_map(double x1) {
  const double c = std::cos(x1), s = std::sin(x1);
  Mat2 m;
  m << c, s, s, -c;
  return m;
}

/// Stator impedance matrix S = [[R, Xdp], [-Xqp, R]].
inline Mat2 stator_matrix(const GenParams& p) {
  Mat2 s;
  s << p.R, p.Xdp, -p.Xqp, p.R;
  return s;
}

}  // namespace detail

struct MultiMachineSolution {
  std::vector<NetworkSolution> gen;  ///< per-generator terminal solution
  std::vector<Complex> v_bus;        ///< per-bus voltage phasor (network frame)
};

/// Solve all bus voltages and generator terminal quantities at once.
///
/// Each generator contributes its stator relation rotated into the network
/// frame; loads are constant-impedance (scaled per bus by load_scale); the
/// whole system is one real linear solve of dimension 2*n_bus.
inline MultiMachineSolution solve_multimachine(
    const std::vector<double>& x1, const std::vector<double>& x3,
    const std::vector<double>& x4, const std::vector<GenParams>& params,
    const MultiMachineNetwork& net, const std::vector<double>& load_scale) {
  net.validate();
  const int ng = (int)net.gen_bus.size();
  if ((int)x1.size() != ng || (int)x3.size() != ng || (int)x4.size() != ng ||
      (int)params.size() != ng)
    throw std::invalid_argument("solve_multimachine: state/parameter count mismatch");
  if ((int)load_scale.size() != net.n_bus)
    throw std::invalid_argument("solve_multimachine: load_scale size must equal n_bus");

  const int n = net.n_bus;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);

  auto add_blk = [&](int bi, int bj, const Mat2& m) {
    A.block<2, 2>(2 * bi, 2 * bj) += m;
  };

  for (const auto& l : net.lines) {
    const Mat2 yb = detail::blk(1.0 / l.z);
    add_blk(l.from, l.from, yb);
    add_blk(l.to, l.to, yb);
    add_blk(l.from, l.to, -yb);
    add_blk(l.to, l.from, -yb);
  }
  for (int b = 0; b < n; ++b)
    add_blk(b, b, detail::blk(net.loads[b] * load_scale[b]));
  if (net.inf_bus >= 0) {
    add_blk(net.inf_bus, net.inf_bus, detail::blk(1.0 / net.z_inf));
    const Complex vinf = std::polar(net.Vinf, net.thinf);
    rhs.segment<2>(2 * net.inf_bus) +=
        detail::blk(1.0 / net.z_inf) * Vec2(vinf.real(), vinf.imag());
  }

  // generator injections: I = C S^{-1} [x3; x4] - C S^{-1} C V_bus
  std::vector<Mat2> Sinv(ng), C(ng);
  for (int g = 0; g < ng; ++g) {
    Sinv[g] = detail::stator_matrix(params[g]).inverse();
    C[g] = detail::frame_map(x1[g]);
    const int b = net.gen_bus[g];
    add_blk(b, b, C[g] * Sinv[g] * C[g]);
    rhs.segment<2>(2 * b) += C[g] * Sinv[g] * Vec2(x3[g], x4[g]);
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::VectorXd v = lu.solve(rhs);
  if (!v.allFinite() || (A * v - rhs).norm() > 1e-8 * (1.0 + rhs.norm()))
    throw std::runtime_error("solve_multimachine: singular or ill-conditioned network");

  MultiMachineSolution sol;
  sol.v_bus.resize(n);
  for (int b = 0; b < n; ++b) sol.v_bus[b] = Complex(v(2 * b), v(2 * b + 1));
  sol.gen.resize(ng);
  for (int g = 0; g < ng; ++g) {
    const int b = net.gen_bus[g];
    const Vec2 vqd = C[g] * v.segment<2>(2 * b);  // C^{-1} = C
    NetworkSolution& gs = sol.gen[g];
    gs.v = DqPair::from_vec(vqd);
    gs.i = DqPair::from_vec(Sinv[g] * (Vec2(x3[g], x4[g]) - vqd));
    gs.y = pmu_from_machine(0.0, x1[g], gs.v, gs.i);
  }
  return sol;
}

/// Kirchhoff residual of a multimachine solution at every bus (test oracle).
inline std::vector<Complex> kcl_residuals(
    const std::vector<double>& x1, const std::vector<double>& x3,
    const std::vector<double>& x4, const std::vector<GenParams>& params,
    const MultiMachineNetwork& net, const std::vector<double>& load_scale,
    const MultiMachineSolution& sol) {
  const int n = net.n_bus;
  std::vector<Complex> inj(n, Complex(0.0, 0.0));
  for (const auto& l : net.lines) {
    const Complex flow = (sol.v_bus[l.from] - sol.v_bus[l.to]) / l.z;
    inj[l.from] += flow;
    inj[l.to] -= flow;
  }
  for (int b = 0; b < n; ++b) inj[b] += net.loads[b] * load_scale[b] * sol.v_bus[b];
  if (net.inf_bus >= 0)
    inj[net.inf_bus] +=
        (sol.v_bus[net.inf_bus] - std::polar(net.Vinf, net.thinf)) / net.z_inf;
  for (size_t g = 0; g < net.gen_bus.size(); ++g) {
    const Mat2 C = detail::frame_map(x1[g]);
    const Vec2 i_net = C * sol.gen[g].i.vec();
    inj[net.gen_bus[g]] -= Complex(i_net(0), i_net(1));
  }
  return inj;
}

}  // namespace sgobs

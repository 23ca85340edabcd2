#include "sgobs/equilibrium.hpp"
#include "sgobs/machine.hpp"
#include "sgobs/network.hpp"
#include "sgobs/scenarios.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>

using namespace sgobs;

namespace {

GenParams reference_params() { return GenParams{}; }

Complex terminal_phasor(const PmuSample& y) { return std::polar(y.y2, y.y1); }
Complex current_phasor(const PmuSample& y) { return std::polar(y.y4, y.y3); }

}  // namespace

TEST_CASE("line-only terminal solve satisfies the stator-shaped relation") {
  const GenParams p = reference_params();
  SmibNetwork net;  // Gl = Bl = 0
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ua(-1.0, 1.5), ue(0.6, 1.4);

  for (int trial = 0; trial < 200; ++trial) {
    const double x1 = ua(rng), x3 = ue(rng), x4 = 0.5 * ua(rng);
    const NetworkSolution s = solve_smib(x1, x3, x4, p, net);

    const Vec2 lhs(x3 - net.Vinf * std::cos(x1 - net.thinf),
                   x4 - net.Vinf * std::sin(x1 - net.thinf));
    Mat2 A;
    A << p.R + net.Re, p.Xdp + net.Xe, -(p.Xqp + net.Xe), p.R + net.Re;
    const Vec2 rhs = A * s.i.vec();
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

    // assembled measurement agrees with the raw phasor assembly
    const PmuSample y = pmu_from_machine(0.0, x1, s.v, s.i);
    CHECK(std::abs(s.y.y1 - y.y1) < 1e-12);
    CHECK(std::abs(s.y.y2 - y.y2) < 1e-12);
    CHECK(std::abs(s.y.y4 - y.y4) < 1e-12);
    CHECK(std::abs(s.y.y5 - y.y5) < 1e-12);
    CHECK(std::abs(s.y.y6 - y.y6) < 1e-12);
  }
}

TEST_CASE("aligned internal voltage drives no current") {
  const GenParams p = reference_params();
  SmibNetwork net;
  const NetworkSolution s = solve_smib(net.thinf, net.Vinf, 0.0, p, net);
  CHECK(std::abs(s.i.q) < 1e-14);
  CHECK(std::abs(s.i.d) < 1e-14);
  CHECK(std::abs(s.v.q - net.Vinf) < 1e-14);
  CHECK(std::abs(s.v.d) < 1e-14);
  CHECK(std::abs(s.y.y5) < 1e-14);
}

TEST_CASE("terminal load keeps the Kirchhoff balance at the terminal bus") {
  const GenParams p = reference_params();
  SmibNetwork net;
  net.Gl = 0.25;
  net.Bl = -0.08;
  const Complex Ze(net.Re, net.Xe);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(-0.5, 1.2), us(0.2, 1.8);
  for (int trial = 0; trial < 200; ++trial) {
    const double x1 = ua(rng), x3 = us(rng), x4 = ua(rng);
    const double scale = us(rng);
    const NetworkSolution s = solve_smib(x1, x3, x4, p, net, scale);

    const Complex vt = terminal_phasor(s.y);
    const Complex im = current_phasor(s.y);
    const Complex i_line = (vt - std::polar(net.Vinf, net.thinf)) / Ze;
    const Complex i_load = Complex(net.Gl * scale, net.Bl * scale) * vt;
    CHECK(std::abs(im - i_line - i_load) < 1e-12);
  }

  // zero load scale reduces to the line-only solve
  const NetworkSolution with = solve_smib(0.9, 1.1, 0.4, p, net, 0.0);
  SmibNetwork bare;
  const NetworkSolution without = solve_smib(0.9, 1.1, 0.4, p, bare);
  CHECK(std::abs(with.i.q - without.i.q) < 1e-14);
  CHECK(std::abs(with.i.d - without.i.d) < 1e-14);
}

TEST_CASE("degenerate load resonant with the line is rejected") {
  const GenParams p = reference_params();
  SmibNetwork net;
  // 1 + yL * Ze = 0  =>  yL = -1/Ze
  const Complex yL = -1.0 / Complex(net.Re, net.Xe);
  net.Gl = yL.real();
  net.Bl = yL.imag();
  CHECK_THROWS_AS(solve_smib(0.5, 1.0, 0.3, p, net), std::runtime_error);
}

TEST_CASE("single-bus network with an external tie reproduces the two-bus solve") {
  const GenParams p = reference_params();
  SmibNetwork smib;
  smib.Gl = 0.25;
  smib.Bl = -0.08;

  MultiMachineNetwork mm;
  mm.n_bus = 1;
  mm.loads = {Complex(smib.Gl, smib.Bl)};
  mm.gen_bus = {0};
  mm.inf_bus = 0;
  mm.z_inf = Complex(smib.Re, smib.Xe);
  mm.Vinf = smib.Vinf;
  mm.thinf = smib.thinf;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ua(-0.5, 1.2), us(0.4, 1.6);
  for (int trial = 0; trial < 100; ++trial) {
    const double x1 = ua(rng), x3 = us(rng), x4 = ua(rng), scale = us(rng);
    const NetworkSolution a = solve_smib(x1, x3, x4, p, smib, scale);
    const MultiMachineSolution b =
        solve_multimachine({x1}, {x3}, {x4}, {p}, mm, {scale});
    CHECK(std::abs(a.i.q - b.gen[0].i.q) < 1e-10);
    CHECK(std::abs(a.i.d - b.gen[0].i.d) < 1e-10);
    CHECK(std::abs(a.v.q - b.gen[0].v.q) < 1e-10);
    CHECK(std::abs(a.v.d - b.gen[0].v.d) < 1e-10);
  }
}

TEST_CASE("multimachine solution satisfies Kirchhoff at every bus") {
  const ScenarioConfig cfg = make_three_machine();
  const MultiMachineNetwork& net = cfg.sim.mm_net;
  std::vector<GenParams> params;
  std::vector<Dispatch> dispatch;
  for (const GenSetup& g : cfg.sim.gens) {
    params.push_back(g.params);
    dispatch.push_back(g.dispatch);
  }
  const std::vector<double> scale(net.n_bus, 1.0);
  const auto eq = equilibrium_multimachine(params, net, dispatch, scale);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x1, x3, x4;
    for (const GenEquilibrium& e : eq) {
      x1.push_back(e.state.x1 + u(rng));
      x3.push_back(e.state.x3 + 0.5 * u(rng));
      x4.push_back(e.state.x4 + 0.5 * u(rng));
    }
    const MultiMachineSolution sol =
        solve_multimachine(x1, x3, x4, params, net, scale);
    for (const Complex& r : kcl_residuals(x1, x3, x4, params, net, scale, sol))
      CHECK(std::abs(r) < 1e-10);
  }
}

TEST_CASE("argument count mismatches are rejected") {
  const ScenarioConfig cfg = make_three_machine();
  std::vector<GenParams> params(3);
  CHECK_THROWS_AS(solve_multimachine({0.1}, {1.0}, {0.2}, params, cfg.sim.mm_net,
                                     std::vector<double>(3, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_multimachine({0.1, 0.2, 0.3}, {1.0, 1.0, 1.0},
                                     {0.2, 0.2, 0.2}, params, cfg.sim.mm_net,
                                     std::vector<double>(1, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("two-bus equilibrium meets the dispatch and rests the plant") {
  const GenParams p = reference_params();
  SmibNetwork net;
  net.Gl = 0.25;
  net.Bl = -0.08;
  const Dispatch d{0.8, 1.0};
  const GenEquilibrium eq = equilibrium_smib(p, net, d);

  CHECK(std::abs(eq.y.y2 - d.V) < 1e-10);
  CHECK(std::abs(eq.y.y5 - d.P) < 1e-10);
  CHECK(eq.state.x2 == 0.0);

  const Eigen::Matrix<double, PlantState::kDim, 1> ds =
      plant_rhs(eq.state, eq.u1, eq.y, eq.params, derive_consts(eq.params));
  CHECK(ds.cwiseAbs().maxCoeff() < 1e-9);

  // mechanical input balances the air-gap power, not just the terminal power
  CHECK(std::abs(eq.u1 - (eq.y.y5 + p.R * eq.y.y4 * eq.y.y4)) < 1e-12);
}

TEST_CASE("multimachine equilibrium rests every plant simultaneously") {
  const ScenarioConfig cfg = make_three_machine();
  const MultiMachineNetwork& net = cfg.sim.mm_net;
  std::vector<GenParams> params;
  std::vector<Dispatch> dispatch;
  for (const GenSetup& g : cfg.sim.gens) {
    params.push_back(g.params);
    dispatch.push_back(g.dispatch);
  }
  const std::vector<double> scale(net.n_bus, 1.0);
  const auto eq = equilibrium_multimachine(params, net, dispatch, scale);
  REQUIRE(eq.size() == 3);

  std::vector<double> x1, x3, x4;
  for (const GenEquilibrium& e : eq) {
    x1.push_back(e.state.x1);
    x3.push_back(e.state.x3);
    x4.push_back(e.state.x4);
  }
  const MultiMachineSolution sol =
      solve_multimachine(x1, x3, x4, params, net, scale);
  for (std::size_t g = 0; g < eq.size(); ++g) {
    CHECK(std::abs(sol.gen[g].y.y2 - dispatch[g].V) < 1e-10);
    CHECK(std::abs(sol.gen[g].y.y5 - dispatch[g].P) < 1e-10);
    const auto ds = plant_rhs(eq[g].state, eq[g].u1, sol.gen[g].y, eq[g].params,
                              derive_consts(eq[g].params));
    CHECK(ds.cwiseAbs().maxCoeff() < 1e-9);
  }
  // heavier dispatch holds a larger rotor angle against the same network
  CHECK(eq[0].state.x1 > eq[1].state.x1);
  CHECK(eq[1].state.x1 > eq[2].state.x1);
}

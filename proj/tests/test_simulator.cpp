#include "sgobs/disturbance.hpp"
#include "sgobs/scenarios.hpp"
#include "sgobs/simulator.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace sgobs;

namespace {

SimScenario quiet_reference(double T) {
  SimScenario sc = make_reference_smib().sim;
  sc.T = T;
  sc.fluct = FluctuationSpec{};  // freeze the load
  return sc;
}

}  // namespace

TEST_CASE("undisturbed closed loop stays at its equilibrium") {
  const SimScenario sc = quiet_reference(10.0);
  const Trajectory tr = integrate(sc);
  const auto v0 = tr.points.front().states[0].vec();
  double worst = 0.0;
  for (const TrajPoint& pt : tr.points)
    worst = std::max(worst, (pt.states[0].vec() - v0).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-8);
}

TEST_CASE("scenario validation rejects impossible setups") {
  SimScenario sc = quiet_reference(1.0);

  SECTION("horizon shorter than one step") {
    sc.T = 1e-5;
    CHECK_THROWS_AS(integrate(sc), std::invalid_argument);
  }
  SECTION("nonpositive step") {
    sc.h = 0.0;
    CHECK_THROWS_AS(integrate(sc), std::invalid_argument);
  }
  SECTION("no generators") {
    sc.gens.clear();
    CHECK_THROWS_AS(integrate(sc), std::invalid_argument);
  }
  SECTION("two-bus network carries exactly one machine") {
    sc.gens.push_back(sc.gens[0]);
    CHECK_THROWS_AS(integrate(sc), std::invalid_argument);
  }
  SECTION("speed kick needs one entry per generator") {
    sc.x2_kick = {0.1, 0.2};
    CHECK_THROWS_AS(integrate(sc), std::invalid_argument);
  }
}

TEST_CASE("runaway states abort the run instead of producing garbage") {
  SimScenario sc = quiet_reference(5.0);
  sc.divergence_bound = 0.5;  // equilibrium states already exceed this
  CHECK_THROWS_AS(integrate(sc), std::runtime_error);
}

TEST_CASE("measurement sampling walks the grid at the requested rate") {
  SimScenario sc = quiet_reference(1.0);
  const Trajectory tr = integrate(sc);

  const auto samples = sample_pmu(tr, 0, 60.0);
  REQUIRE(samples.size() == 60);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    CHECK(samples[k].t == (double)k / 60.0);
    // zero-order hold: the sample equals the grid point at or before t_k
    const auto idx = (std::size_t)std::floor(samples[k].t / sc.h + 1e-6);
    CHECK(samples[k].y2 == tr.points[idx].pmu[0].y2);
    CHECK(samples[k].y5 == tr.points[idx].pmu[0].y5);
  }

  // sampling at the integrator rate returns every grid point
  const auto dense = sample_pmu(tr, 0, 1.0 / sc.h);
  CHECK(dense.size() == tr.points.size() - 1);

  CHECK_THROWS_AS(sample_pmu(tr, 0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_pmu(tr, 0, 2.0 / sc.h), std::invalid_argument);
  CHECK_THROWS_AS(sample_pmu(tr, 1, 60.0), std::invalid_argument);
}

TEST_CASE("noiseless sampling is exact and noisy sampling is reproducible") {
  SimScenario sc = quiet_reference(1.0);
  const Trajectory tr = integrate(sc);

  const auto clean = sample_pmu(tr, 0, 60.0);
  const auto clean2 = sample_pmu(tr, 0, 60.0, NoiseSpec{});
  for (std::size_t k = 0; k < clean.size(); ++k) {
    CHECK(clean[k].y1 == clean2[k].y1);
    CHECK(clean[k].y6 == clean2[k].y6);
  }

  NoiseSpec noise{1e-3, 1e-3, 5};
  const auto a = sample_pmu(tr, 0, 60.0, noise);
  const auto b = sample_pmu(tr, 0, 60.0, noise);
  bool any_different_from_clean = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].y2 == b[k].y2);
    CHECK(a[k].y3 == b[k].y3);
    any_different_from_clean |= a[k].y2 != clean[k].y2;
    // the power measurements stay consistent with the noisy phasors
    CHECK(std::abs(a[k].y5 - a[k].y2 * a[k].y4 * std::cos(a[k].y1 - a[k].y3)) < 1e-14);
    CHECK(std::abs(a[k].y6 - a[k].y2 * a[k].y4 * std::sin(a[k].y1 - a[k].y3)) < 1e-14);
  }
  CHECK(any_different_from_clean);

  NoiseSpec other = noise;
  other.seed = 6;
  const auto c = sample_pmu(tr, 0, 60.0, other);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) differs |= a[k].y2 != c[k].y2;
  CHECK(differs);
}

TEST_CASE("identical seeds reproduce the trajectory bit for bit") {
  ScenarioConfig cfg = make_noisy_smib();
  cfg.sim.T = 2.0;
  const Trajectory a = integrate(cfg.sim);
  const Trajectory b = integrate(cfg.sim);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t k = 0; k < a.points.size(); k += 37)
    CHECK(a.points[k].states[0].vec() == b.points[k].states[0].vec());

  SimScenario reseeded = cfg.sim;
  reseeded.seed = 12345;
  const Trajectory c = integrate(reseeded);
  CHECK(a.points.back().states[0].x1 != c.points.back().states[0].x1);
}

TEST_CASE("load fluctuation composes sines, steps, and the random component") {
  FluctuationSpec spec;
  spec.sines = {{0.5, 0.02}, {1.3, 0.01}};
  spec.steps = {{1.0, 1.10}, {2.0, 0.95}};
  LoadProcess proc(spec, 1e-3, 1);

  auto expected = [&](double t) {
    double s = 1.0 + 0.02 * std::sin(2.0 * M_PI * 0.5 * t) +
               0.01 * std::sin(2.0 * M_PI * 1.3 * t);
    if (t >= 1.0) s *= 1.10;
    if (t >= 2.0) s *= 1.10 * 0.95 / 1.10;
    return s;
  };
  for (double t : {0.0, 0.4, 0.999, 1.0, 1.5, 2.0, 3.7})
    CHECK(proc.scale(t) == Catch::Approx(expected(t)).margin(1e-15));
}

TEST_CASE("random load component has the mean-reverting stationary variance") {
  FluctuationSpec spec;
  spec.ou = {0.05, 1.0, 1.0};  // wide clip so it never binds
  const double h = 1e-3;
  LoadProcess proc(spec, h, 99);

  // warm up past several reversion times, then accumulate moments
  const int warm = 5000, n = 2000000;
  for (int i = 0; i < warm; ++i) proc.advance();
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    proc.advance();
    const double v = proc.ou_value();
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  const double target = 0.05 * 0.05 / 2.0;  // sigma^2 / (2 kappa)
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == Catch::Approx(target).epsilon(0.10));
}

TEST_CASE("random load component respects its clip") {
  FluctuationSpec spec;
  spec.ou = {0.5, 0.2, 0.01};  // aggressive noise, tight clip
  LoadProcess proc(spec, 1e-3, 4);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    proc.advance();
    worst = std::max(worst, std::abs(proc.ou_value()));
  }
  CHECK(worst <= 0.01 + 1e-15);
  CHECK(worst > 0.009);  // the clip actually engages
}

TEST_CASE("drift extension starts at zero and is integrated with the plant") {
  SimScenario sc = quiet_reference(2.0);
  sc.with_extension = true;
  const Trajectory tr = integrate(sc);
  REQUIRE(!tr.points.front().ext.empty());
  CHECK(tr.points.front().ext[0](0) == 0.0);
  CHECK(tr.points.front().ext[0](1) == 0.0);
  const double x10 = tr.points.front().states[0].x1;
  for (const TrajPoint& pt : tr.points)
    CHECK(std::abs(pt.states[0].x1 - pt.ext[0](0) - x10) < 1e-10);
}

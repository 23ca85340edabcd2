#include "sgobs/machine.hpp"
#include "sgobs/observer_core.hpp"
#include "sgobs/regression.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace sgobs;

namespace {

struct Snapshot {
  double x1, x3, x4;
  DqPair i;
  PmuSample y;
};

Snapshot make_snapshot(double x1, double x3, double x4, double iq, double id,
                       const GenParams& p) {
  Snapshot s;
  s.x1 = x1;
  s.x3 = x3;
  s.x4 = x4;
  s.i = {iq, id};
  const DqPair v = voltages_from_internal(x3, x4, s.i, p);
  s.y = pmu_from_machine(0.0, x1, v, s.i);
  return s;
}

}  // namespace

TEST_CASE("quadratic-map convention") {
  const Eigen::Vector3d g = g_map(2.0, -3.0);
  CHECK(g(0) == 4.0);
  CHECK(g(1) == 9.0);
  CHECK(g(2) == -6.0);
}

TEST_CASE("numeric regressor reproduces the squared current magnitude") {
  GenParams p;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ua(-3.0, 3.0), ue(0.6, 1.5), ui(-1.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    p.R = (trial % 2 == 0) ? 0.0 : 0.01 * (trial % 7);
    const Snapshot s = make_snapshot(ua(rng), ue(rng), ui(rng), ui(rng), ui(rng), p);
    if (s.y.y2 < 1e-2) continue;
    const double v1 = ua(rng);
    const double th0 = s.x1 - v1;

    const RegressorSample rs = regressor_numeric(v1, s.y, p);
    CHECK(rs.Y == s.y.y4 * s.y.y4);
    CHECK(std::abs(rs.Y - rs.predict(std::sin(th0), std::cos(th0))) < 1e-10);
  }
}

TEST_CASE("numeric extraction recovers the exact quadratic form everywhere") {
  GenParams p;
  p.R = 0.03;
  const Snapshot s = make_snapshot(0.8, 1.1, 0.35, 0.7, -0.4, p);
  const double v1 = -0.4;
  const RegressorSample rs = regressor_numeric(v1, s.y, p);
  const Mat2 W = w_matrix(v1, s.y, p);

  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double a = u(rng), b = u(rng);  // not restricted to the unit circle
    CHECK(std::abs(rs.predict(a, b) - detail::y4sq_of_theta(a, b, v1, s.y, p, W)) <
          1e-12);
  }
}

TEST_CASE("closed-form zero-resistance regressor matches the numeric one") {
  GenParams p;
  p.R = 0.0;
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> ua(-3.0, 3.0), ue(0.6, 1.5), ui(-1.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const Snapshot s = make_snapshot(ua(rng), ue(rng), ui(rng), ui(rng), ui(rng), p);
    if (s.y.y2 < 1e-2) continue;
    const double v1 = ua(rng);
    const double th0 = s.x1 - v1;

    const RegressorSample cf = regressor_closed_form_R0(v1, s.y, p);
    CHECK(std::abs(cf.Y - cf.predict(std::sin(th0), std::cos(th0))) < 1e-10);

    const RegressorSample nu = regressor_numeric(v1, s.y, p);
    CHECK((nu.stacked() - cf.stacked()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("closed form requires zero stator resistance") {
  GenParams p;  // reference R = 0.003
  const Snapshot s = make_snapshot(0.5, 1.0, 0.3, 0.6, -0.2, p);
  CHECK_THROWS_AS(regressor_closed_form_R0(0.0, s.y, p), std::invalid_argument);
}

TEST_CASE("regressor collapses onto the apparent-power identity") {
  // For measurement-consistent inputs the linear block vanishes and the
  // quadratic block degenerates to (s^2/y2^2) * (1, 1, 0): the regression
  // carries the squared apparent power and nothing else, for any resistance.
  GenParams p;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ua(-3.0, 3.0), ue(0.6, 1.5), ui(-1.0, 1.0),
      ur(0.0, 0.05);
  for (int trial = 0; trial < 300; ++trial) {
    p.R = (trial % 3 == 0) ? 0.0 : ur(rng);
    const Snapshot s = make_snapshot(ua(rng), ue(rng), ui(rng), ui(rng), ui(rng), p);
    if (s.y.y2 < 1e-2) continue;
    const RegressorSample rs = regressor_numeric(ua(rng), s.y, p);

    const double s2 = (s.y.y5 * s.y.y5 + s.y.y6 * s.y.y6) / (s.y.y2 * s.y.y2);
    CHECK(rs.psi1.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(rs.psi2(2)) < 1e-9);
    CHECK(rs.psi2(0) == Catch::Approx(s2).margin(1e-9));
    CHECK(rs.psi2(1) == Catch::Approx(s2).margin(1e-9));
  }
}

TEST_CASE("inconsistent measurements are refused by the extractor") {
  GenParams p;
  PmuSample y;  // arbitrary junk: y4^2 disagrees with y5, y6, y2
  y.y1 = 0.2;
  y.y2 = 1.0;
  y.y3 = 0.1;
  y.y4 = 3.0;
  y.y5 = 0.1;
  y.y6 = 0.0;
  CHECK_THROWS_AS(regressor_numeric(0.0, y, p), std::runtime_error);

  y.y2 = 0.0;
  CHECK_THROWS_AS(regressor_numeric(0.0, y, p), std::invalid_argument);
}

TEST_CASE("excitation monitor accumulates a time-weighted gramian") {
  ExcitationMonitor<2> mon(0.5);
  using V = Eigen::Vector2d;

  mon.add(0.0, V(1.0, 0.0));  // establishes the clock, adds nothing yet
  CHECK(mon.gramian().isZero(0.0));
  CHECK(!mon.excited());

  mon.add(1.0, V(1.0, 0.0));
  CHECK(mon.gramian()(0, 0) == 1.0);
  CHECK(mon.rank() == 1);
  CHECK(!mon.excited());  // one direction only, min eigenvalue still zero

  mon.add(2.0, V(0.0, 1.0));
  CHECK(mon.gramian()(1, 1) == 1.0);
  CHECK(mon.rank() == 2);
  CHECK(mon.excited());
  CHECK(mon.t_c() == 2.0);
  CHECK(mon.min_eig() == Catch::Approx(1.0));

  SECTION("simultaneous rows both get the full elapsed weight") {
    ExcitationMonitor<2> two(0.5);
    two.add_rows(0.0, {V(1.0, 0.0), V(0.0, 1.0)});
    two.add_rows(1.0, {V(1.0, 0.0), V(0.0, 1.0)});
    CHECK(two.gramian()(0, 0) == 1.0);
    CHECK(two.gramian()(1, 1) == 1.0);
    CHECK(two.excited());
  }

  SECTION("the clock must advance strictly") {
    CHECK_THROWS_AS(mon.add(2.0, V(1.0, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(mon.add(1.5, V(1.0, 1.0)), std::invalid_argument);
  }

  SECTION("threshold must be positive") {
    CHECK_THROWS_AS(ExcitationMonitor<2>(0.0), std::invalid_argument);
  }
}

TEST_CASE("excitation level never decreases") {
  ExcitationMonitor<3> mon(10.0);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double prev = -1.0;
  for (int k = 0; k <= 200; ++k) {
    mon.add(0.01 * k, Eigen::Vector3d(u(rng), u(rng), u(rng)));
    CHECK(mon.min_eig() >= prev - 1e-14);
    prev = mon.min_eig();
  }
  CHECK(mon.rank() == 3);
}

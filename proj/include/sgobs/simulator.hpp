#pragma once

// Closed-loop simulation: fixed-step RK4 over the generator + exciter states
// with an algebraic network solve at every stage, seeded load fluctuations,
// and PMU measurement synthesis at a configurable sampling rate.

#include "sgobs/disturbance.hpp"
#include "sgobs/equilibrium.hpp"
#include "sgobs/machine.hpp"
#include "sgobs/network.hpp"
#include "sgobs/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sgobs {

struct GenSetup {
  GenParams params;
  Dispatch dispatch;
};

/// Everything needed to run one closed-loop scenario.
struct SimScenario {
  std::vector<GenSetup> gens;

  bool smib = true;            ///< network kind
  SmibNetwork smib_net;        ///< used when smib == true (single generator)
  MultiMachineNetwork mm_net;  ///< used otherwise

  FluctuationSpec fluct;
  double T = 20.0;
  double h = 1e-3;
  std::uint64_t seed = 1;
  double divergence_bound = 50.0;  ///< abort when any machine state exceeds this

  bool with_extension = false;     ///< co-integrate the observer extension (v1, v2)
  std::vector<double> x2_kick;     ///< optional initial speed offsets (tests)
};

struct TrajPoint {
  double t = 0.0;
  std::vector<PlantState> states;
  std::vector<PmuSample> pmu;  ///< noiseless terminal measurements, one per generator
  std::vector<Vec2> ext;       ///< (v1, v2) per generator when enabled
};

struct Trajectory {
  double h = 1e-3;
  std::vector<double> u1;          ///< constant mechanical power input per generator
  std::vector<GenParams> params;   ///< resolved parameters (Vref set) per generator
  std::vector<TrajPoint> points;

  int n_gens() const { return (int)u1.size(); }
};

struct NoiseSpec {
  double sigma_mag = 0.0;  ///< std of additive noise on y2, y4 [pu]
  double sigma_ang = 0.0;  ///< std of additive noise on y1, y3 [rad]
  std::uint64_t seed = 1;

  void validate() const {
    if (sigma_mag < 0.0 || sigma_ang < 0.0)
      throw std::invalid_argument("NoiseSpec: standard deviations must be nonnegative");
  }
};

namespace detail {

/// Per-stage closed-loop right-hand side shared by both network kinds.
class ClosedLoopRhs {
 public:
  ClosedLoopRhs(const SimScenario& sc, std::vector<GenParams> params,
                std::vector<double> u1)
      : sc_(sc), params_(std::move(params)), u1_(std::move(u1)) {
    const int ng = (int)params_.size();
    dc_.reserve(ng);
    for (const auto& p : params_) dc_.push_back(derive_consts(p));
    dim_per_gen_ = sc.with_extension ? 11 : 9;
  }

  int dim() const { return dim_per_gen_ * (int)params_.size(); }
  int dim_per_gen() const { return dim_per_gen_; }
  const std::vector<DerivedConsts>& consts() const { return dc_; }

  /// Network solution for the packed state at time t with given load scales.
  std::vector<NetworkSolution> solve(double t, const Eigen::VectorXd& X,
                                     const std::vector<double>& scales) const {
    const int ng = (int)params_.size();
    std::vector<NetworkSolution> out;
    if (sc_.smib) {
      out.push_back(solve_smib(X(0), X(2), X(3), params_[0], sc_.smib_net, scales[0]));
    } else {
      std::vector<double> x1(ng), x3(ng), x4(ng);
      for (int g = 0; g < ng; ++g) {
        x1[g] = X(dim_per_gen_ * g);
        x3[g] = X(dim_per_gen_ * g + 2);
        x4[g] = X(dim_per_gen_ * g + 3);
      }
      MultiMachineSolution sol = solve_multimachine(x1, x3, x4, params_, sc_.mm_net, scales);
      out = std::move(sol.gen);
    }
    for (auto& ns : out) ns.y.t = t;
    return out;
  }

  Eigen::VectorXd operator()(double t, const Eigen::VectorXd& X,
                             const std::vector<double>& scales) const {
    const int ng = (int)params_.size();
    const std::vector<NetworkSolution> net = solve(t, X, scales);
    Eigen::VectorXd dX(dim());
    for (int g = 0; g < ng; ++g) {
      const int off = dim_per_gen_ * g;
      const PlantState s = PlantState::from_vec(X.segment<9>(off));
      dX.segment<9>(off) = plant_rhs(s, u1_[g], net[g].y, params_[g], dc_[g]);
      if (sc_.with_extension) {
        const double v2 = X(off + 10);
        dX(off + 9) = v2;
        dX(off + 10) = -dc_[g].a0 * v2 + dc_[g].b0 * (u1_[g] - net[g].y.y5) -
                       dc_[g].b3 * net[g].y.y4 * net[g].y.y4;
      }
    }
    return dX;
  }

 private:
  const SimScenario& sc_;
  std::vector<GenParams> params_;
  std::vector<double> u1_;
  std::vector<DerivedConsts> dc_;
  int dim_per_gen_ = 9;
};

}  // namespace detail

/// Run the closed-loop scenario from its computed equilibrium.
inline Trajectory integrate(const SimScenario& sc) {
  if (sc.h <= 0.0) throw std::invalid_argument("integrate: h must be positive");
  if (sc.T < sc.h) throw std::invalid_argument("integrate: T must be at least h");
  if (sc.gens.empty()) throw std::invalid_argument("integrate: no generators");
  if (sc.smib && sc.gens.size() != 1)
    throw std::invalid_argument("integrate: SMIB scenario requires exactly one generator");
  sc.fluct.validate();

  const int ng = (int)sc.gens.size();
  const int n_proc = sc.smib ? 1 : sc.mm_net.n_bus;

  // one load process per bus (independent OU streams, shared deterministic part)
  std::vector<LoadProcess> procs;
  procs.reserve(n_proc);
  for (int b = 0; b < n_proc; ++b)
    procs.emplace_back(sc.fluct, sc.h, sc.seed, (std::uint64_t)b);
  auto scales_at = [&](double t) {
    std::vector<double> s(n_proc);
    for (int b = 0; b < n_proc; ++b) s[b] = procs[b].scale(t);
    return s;
  };

  // equilibrium at the t=0 load level
  std::vector<GenParams> params;
  std::vector<double> u1;
  std::vector<PlantState> init;
  {
    const std::vector<double> s0 = scales_at(0.0);
    if (sc.smib) {
      const GenEquilibrium eq =
          equilibrium_smib(sc.gens[0].params, sc.smib_net, sc.gens[0].dispatch, s0[0]);
      params.push_back(eq.params);
      u1.push_back(eq.u1);
      init.push_back(eq.state);
    } else {
      std::vector<GenParams> ps;
      std::vector<Dispatch> ds;
      for (const auto& g : sc.gens) {
        ps.push_back(g.params);
        ds.push_back(g.dispatch);
      }
      for (const auto& eq : equilibrium_multimachine(ps, sc.mm_net, ds, s0)) {
        params.push_back(eq.params);
        u1.push_back(eq.u1);
        init.push_back(eq.state);
      }
    }
  }
  if (!sc.x2_kick.empty()) {
    if ((int)sc.x2_kick.size() != ng)
      throw std::invalid_argument("integrate: x2_kick size mismatch");
    for (int g = 0; g < ng; ++g) init[g].x2 += sc.x2_kick[g];
  }

  const detail::ClosedLoopRhs rhs(sc, params, u1);
  const int dpg = rhs.dim_per_gen();
  Eigen::VectorXd X = Eigen::VectorXd::Zero(rhs.dim());
  for (int g = 0; g < ng; ++g) X.segment<9>(dpg * g) = init[g].vec();

  const auto n_steps = (std::size_t)std::llround(sc.T / sc.h);
  Trajectory tr;
  tr.h = sc.h;
  tr.u1 = u1;
  tr.params = params;
  tr.points.reserve(n_steps + 1);

  auto record = [&](double t) {
    TrajPoint pt;
    pt.t = t;
    const std::vector<NetworkSolution> net = rhs.solve(t, X, scales_at(t));
    pt.states.resize(ng);
    pt.pmu.resize(ng);
    if (sc.with_extension) pt.ext.resize(ng);
    for (int g = 0; g < ng; ++g) {
      pt.states[g] = PlantState::from_vec(X.segment<9>(dpg * g));
      pt.pmu[g] = net[g].y;
      if (sc.with_extension) pt.ext[g] = Vec2(X(dpg * g + 9), X(dpg * g + 10));
    }
    tr.points.push_back(std::move(pt));
  };

  record(0.0);
  const double h = sc.h;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = (double)k * h;
    // load scales held piecewise per stage time (OU held over the whole step)
    const auto s0 = scales_at(t);
    const auto sh = scales_at(t + 0.5 * h);
    const auto s1 = scales_at(t + h);
    const Eigen::VectorXd k1 = rhs(t, X, s0);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * h, X + 0.5 * h * k1, sh);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * h, X + 0.5 * h * k2, sh);
    const Eigen::VectorXd k4 = rhs(t + h, X + h * k3, s1);
    X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    for (auto& pr : procs) pr.advance();

    for (int g = 0; g < ng; ++g) {
      const auto xs = X.segment<9>(dpg * g);
      if (!xs.allFinite() || xs.cwiseAbs().maxCoeff() > sc.divergence_bound)
        throw std::runtime_error("integrate: state divergence at t=" +
                                 std::to_string(t + h) + " (generator " +
                                 std::to_string(g) + ")");
    }
    record((double)(k + 1) * h);
  }
  return tr;
}

/// Zero-order sampling of one generator's terminal quantities at rate fs,
/// with optional additive Gaussian noise on the phasor channels. Power
/// components are recomputed from the noisy phasors so every sample stays
/// internally consistent.
inline std::vector<PmuSample> sample_pmu(const Trajectory& tr, int gen, double fs,
                                         const NoiseSpec& noise = {}) {
  noise.validate();
  if (fs <= 0.0) throw std::invalid_argument("sample_pmu: fs must be positive");
  if (fs > 1.0 / tr.h + 1e-9)
    throw std::invalid_argument("sample_pmu: fs exceeds the trajectory rate 1/h");
  if (gen < 0 || gen >= tr.n_gens())
    throw std::invalid_argument("sample_pmu: generator index out of range");

  const double t_end = tr.points.back().t;
  const bool noisy = noise.sigma_mag > 0.0 || noise.sigma_ang > 0.0;
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (noisy) {
    std::seed_seq sq{noise.seed, (std::uint64_t)gen, std::uint64_t{0x706d75} /* "pmu" */};
    rng.seed(sq);
  }

  std::vector<PmuSample> out;
  for (std::size_t k = 0;; ++k) {
    const double tk = (double)k / fs;
    if (tk >= t_end - 1e-12) break;
    // value held from the grid point at or before the device clock; the
    // nudge snaps clock ticks that are exact grid multiples up to rounding
    const auto idx = (std::size_t)std::floor(tk / tr.h + 1e-6);
    if (idx >= tr.points.size()) break;
    PmuSample y = tr.points[idx].pmu[gen];
    y.t = tk;  // stamped with the device clock, not the grid time
    if (noisy) {
      y.y1 += noise.sigma_ang * gauss(rng);
      y.y3 += noise.sigma_ang * gauss(rng);
      y.y2 = std::max(1e-6, y.y2 + noise.sigma_mag * gauss(rng));
      y.y4 = std::max(0.0, y.y4 + noise.sigma_mag * gauss(rng));
      y.y5 = y.y2 * y.y4 * std::cos(y.y1 - y.y3);
      y.y6 = y.y2 * y.y4 * std::sin(y.y1 - y.y3);
    }
    out.push_back(y);
  }
  return out;
}

}  // namespace sgobs

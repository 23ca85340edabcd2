#pragma once

// Observer execution pipeline: drives the observers over a simulated
// trajectory (or an externally supplied measurement stream aligned to its
// grid), holding the latest measurement between samples and emitting one
// estimate record per plant step.

#include "sgobs/observers.hpp"
#include "sgobs/simulator.hpp"

#include <optional>
#include <vector>

namespace sgobs {

/// One observer input tuple: measurement plus the known inputs at that time.
/// u2 is optional; the full observer refuses to run without it.
struct ObsInput {
  PmuSample y;
  double u1 = 0.0;
  std::optional<double> u2;
};

/// Build the observer input stream from a simulated trajectory: PMU samples
/// at rate fs plus the matching zero-order-held known inputs.
inline std::vector<ObsInput> make_inputs(const Trajectory& tr, int gen, double fs,
                                         const NoiseSpec& noise = {}) {
  std::vector<ObsInput> in;
  for (const PmuSample& y : sample_pmu(tr, gen, fs, noise)) {
    ObsInput u;
    u.y = y;
    u.u1 = tr.u1[gen];
    // same at-or-before grid index the sample value was held from
    const auto idx = (std::size_t)std::floor(y.t / tr.h + 1e-6);
    u.u2 = tr.points[idx].states[gen].Ef;
    in.push_back(u);
  }
  return in;
}

struct PartialRunResult {
  std::vector<EstimateRecord> records;  ///< one per plant step
  int degenerate_steps = 0;
  int restarts = 0;
};

struct FullRunResult {
  std::vector<EstimateRecord> records;
  std::vector<FullObserverLog> logs;    ///< estimator diagnostics per step
  bool ie_reached = false;
  double t_c = -1.0;
  double quad_min_eig = 0.0;            ///< excitation of the quadratic stack
  bool quad_ie_reached = false;
  int restarts = 0;
};

namespace detail {

inline EstimateRecord make_record(double t, const StateEstimate& est,
                                  const PlantState& truth) {
  EstimateRecord r;
  r.t = t;
  r.xh1 = est.x1; r.xh2 = est.x2; r.xh3 = est.x3; r.xh4 = est.x4;
  r.x1 = truth.x1; r.x2 = truth.x2; r.x3 = truth.x3; r.x4 = truth.x4;
  r.e1 = est.x1 - truth.x1;
  r.e2 = est.x2 - truth.x2;
  r.e3 = est.x3 - truth.x3;
  r.e4 = est.x4 - truth.x4;
  return r;
}

}  // namespace detail

/// Run the partial-input observer over the trajectory grid. Records are
/// emitted at every grid time, using the measurement held at that instant.
inline PartialRunResult run_partial_observer(const Trajectory& tr, int gen,
                                             const std::vector<ObsInput>& inputs,
                                             double restart_period = 0.0,
                                             const PartialObserverConfig& cfg = {}) {
  if (inputs.empty()) throw std::invalid_argument("run_partial_observer: empty input stream");
  PartialObserver obs(tr.params[gen], cfg);
  PartialRunResult out;
  out.records.reserve(tr.points.size());

  std::size_t next_in = 0;
  ObsInput held = inputs.front();
  double next_restart = restart_period > 0.0 ? restart_period : -1.0;
  const std::size_t n = tr.points.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = tr.points[k].t;
    while (next_in < inputs.size() && inputs[next_in].y.t <= t + 1e-12)
      held = inputs[next_in++];
    if (next_restart > 0.0 && t >= next_restart - 1e-12) {
      obs.restart_extension();
      ++out.restarts;
      next_restart += restart_period;
    }
    const StateEstimate est = obs.estimate(held.y);
    if (est.degenerate) ++out.degenerate_steps;
    out.records.push_back(detail::make_record(t, est, tr.points[k].states[gen]));
    if (k + 1 < n) obs.step(held.y, held.u1, tr.h);
  }
  return out;
}

/// Run the full-input observer over the trajectory grid. Requires u2 on
/// every input tuple.
inline FullRunResult run_full_observer(const Trajectory& tr, int gen,
                                       const std::vector<ObsInput>& inputs,
                                       const FullObserverConfig& cfg,
                                       double restart_period = 0.0) {
  if (inputs.empty()) throw std::invalid_argument("run_full_observer: empty input stream");
  for (const ObsInput& u : inputs)
    if (!u.u2.has_value())
      throw std::runtime_error(
          "run_full_observer: field-voltage input u2 missing from the stream");

  FullObserver obs(tr.params[gen], cfg);
  FullRunResult out;
  out.records.reserve(tr.points.size());
  out.logs.reserve(tr.points.size());

  std::size_t next_in = 0;
  ObsInput held = inputs.front();
  bool have_sample = false;
  double next_restart = restart_period > 0.0 ? restart_period : -1.0;
  const std::size_t n = tr.points.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = tr.points[k].t;
    bool fresh = false;
    while (next_in < inputs.size() && inputs[next_in].y.t <= t + 1e-12) {
      held = inputs[next_in++];
      fresh = true;
    }
    if (next_restart > 0.0 && t >= next_restart - 1e-12) {
      obs.restart(held.y, *held.u2);
      ++out.restarts;
      next_restart += restart_period;
      fresh = false;
      have_sample = true;
    }
    if (fresh) {
      obs.on_sample(held.y, *held.u2);
      have_sample = true;
    }
    if (!have_sample) {
      obs.on_sample(held.y, *held.u2);
      have_sample = true;
    }
    out.records.push_back(
        detail::make_record(t, obs.estimate(held.y), tr.points[k].states[gen]));
    out.logs.push_back(obs.log(t));
    if (k + 1 < n) obs.step(held.y, held.u1, *held.u2, tr.h);
  }
  out.ie_reached = obs.monitor().excited();
  out.t_c = obs.monitor().t_c();
  out.quad_min_eig = obs.quad_monitor().min_eig();
  out.quad_ie_reached = obs.quad_monitor().excited();
  return out;
}

}  // namespace sgobs

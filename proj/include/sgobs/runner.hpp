#pragma once

// Run orchestration: drive a scenario end to end, write the CSV artifacts
// and the run manifest. Used by the command-line tool and the release gate.

#include "sgobs/config.hpp"
#include "sgobs/csv.hpp"
#include "sgobs/pipeline.hpp"
#include "sgobs/version.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace sgobs {

/// Serialize the resolved configuration (inverse of parse_scenario).
inline Json scenario_to_json(const ScenarioConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  j["T"] = cfg.sim.T;
  j["h"] = cfg.sim.h;
  j["fs"] = cfg.fs;
  j["seed"] = cfg.sim.seed;

  Json net;
  if (cfg.sim.smib) {
    const SmibNetwork& n = cfg.sim.smib_net;
    net = {{"kind", "smib"}, {"Vinf", n.Vinf}, {"thinf", n.thinf},
           {"Re", n.Re},     {"Xe", n.Xe},     {"Gl", n.Gl},
           {"Bl", n.Bl}};
  } else {
    const MultiMachineNetwork& m = cfg.sim.mm_net;
    net["kind"] = "multimachine";
    net["n_bus"] = m.n_bus;
    net["lines"] = Json::array();
    for (const Line& l : m.lines)
      net["lines"].push_back(
          {{"from", l.from}, {"to", l.to}, {"r", l.z.real()}, {"x", l.z.imag()}});
    net["loads"] = Json::array();
    for (int b = 0; b < m.n_bus; ++b)
      if (m.loads[(std::size_t)b] != Complex(0.0, 0.0))
        net["loads"].push_back({{"bus", b},
                                {"g", m.loads[(std::size_t)b].real()},
                                {"b", m.loads[(std::size_t)b].imag()}});
    if (m.inf_bus >= 0)
      net["inf_bus"] = {{"bus", m.inf_bus},     {"r", m.z_inf.real()},
                        {"x", m.z_inf.imag()},  {"v", m.Vinf},
                        {"angle", m.thinf}};
  }
  j["network"] = net;

  j["generators"] = Json::array();
  for (std::size_t g = 0; g < cfg.sim.gens.size(); ++g) {
    const GenParams& p = cfg.sim.gens[g].params;
    Json jp = {{"H", p.H},     {"D", p.D},     {"Td0p", p.Td0p}, {"Tq0p", p.Tq0p},
               {"Xd", p.Xd},   {"Xdp", p.Xdp}, {"Xq", p.Xq},     {"Xqp", p.Xqp},
               {"R", p.R},     {"w0", p.w0},   {"KA", p.KA},     {"TA", p.TA},
               {"TB", p.TB},   {"TC", p.TC},   {"Kp", p.Kp},     {"Tw", p.Tw},
               {"T1", p.T1},   {"T2", p.T2},   {"T3", p.T3},     {"T4", p.T4}};
    Json jg = {{"params", jp},
               {"dispatch",
                {{"P", cfg.sim.gens[g].dispatch.P}, {"V", cfg.sim.gens[g].dispatch.V}}}};
    if (!cfg.sim.smib) jg["bus"] = cfg.sim.mm_net.gen_bus[g];
    j["generators"].push_back(jg);
  }

  Json fl;
  if (!cfg.sim.fluct.sines.empty()) {
    fl["sines"] = Json::array();
    for (const SineTerm& s : cfg.sim.fluct.sines)
      fl["sines"].push_back({{"freq", s.freq}, {"amp", s.amp}});
  }
  if (!cfg.sim.fluct.steps.empty()) {
    fl["steps"] = Json::array();
    for (const StepTerm& s : cfg.sim.fluct.steps)
      fl["steps"].push_back({{"t", s.t}, {"factor", s.factor}});
  }
  if (cfg.sim.fluct.ou.amp > 0.0)
    fl["ou"] = {{"sigma", cfg.sim.fluct.ou.sigma},
                {"kappa", cfg.sim.fluct.ou.kappa},
                {"amp", cfg.sim.fluct.ou.amp}};
  if (!fl.is_null()) j["fluctuation"] = fl;
  if (!cfg.sim.x2_kick.empty()) j["x2_kick"] = cfg.sim.x2_kick;

  if (cfg.noise.sigma_mag > 0.0 || cfg.noise.sigma_ang > 0.0)
    j["noise"] = {{"sigma_mag", cfg.noise.sigma_mag}, {"sigma_ang", cfg.noise.sigma_ang}};

  const LsDremConfig<4>& e = cfg.observer.full.estimator;
  j["observer"] = {{"kind", cfg.observer.kind},
                   {"gen", cfg.observer.gen},
                   {"estimator",
                    {{"gain_ls", e.gain_ls},
                     {"gain1", e.gain1},
                     {"gain2", e.gain2},
                     {"f0", e.f0},
                     {"chi0", e.chi0},
                     {"k", e.k},
                     {"theta2_min", e.theta2_min},
                     {"theta2_sign", e.theta2_sign},
                     {"theta_init", {e.theta_init(0), e.theta_init(1)}}}},
                   {"ie_delta", cfg.observer.full.ie_delta}};
  if (cfg.observer.restart_period > 0.0)
    j["observer"]["restart_period"] = cfg.observer.restart_period;
  return j;
}

struct RunResultFiles {
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
};

namespace detail {

inline void write_manifest(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                           const RunResultFiles& files, double wall_ms,
                           const std::string& command) {
  Json m;
  m["command"] = command;
  m["config"] = scenario_to_json(cfg);
  m["version"] = kVersion;
  m["seed"] = cfg.sim.seed;
  m["outputs"] = files.outputs;
  if (!files.warnings.empty()) m["warnings"] = files.warnings;
  m["wall_ms"] = wall_ms;
  const std::filesystem::path path = dir / (cfg.name + "_manifest.json");
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("manifest: cannot open " + tmp.string());
    out << m.dump(2) << '\n';
    if (!out) throw std::runtime_error("manifest: write failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<std::string> state_columns(int ng) {
  std::vector<std::string> cols{"t"};
  static const char* names[] = {"x1", "x2", "x3", "x4", "q", "Ef", "p1", "p2", "p3"};
  for (int g = 0; g < ng; ++g)
    for (const char* n : names) cols.push_back(std::string(n) + "_g" + std::to_string(g));
  return cols;
}

}  // namespace detail

/// Simulate the scenario and write the trajectory + PMU stream CSVs.
inline RunResultFiles run_simulate(const ScenarioConfig& cfg,
                                   const std::filesystem::path& outdir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(outdir);
  const Trajectory tr = integrate(cfg.sim);
  RunResultFiles files;

  const int ng = tr.n_gens();
  {
    CsvWriter w(outdir / (cfg.name + "_states.csv"), detail::state_columns(ng));
    std::vector<double> row(1 + 9 * (std::size_t)ng);
    for (const TrajPoint& pt : tr.points) {
      row[0] = pt.t;
      for (int g = 0; g < ng; ++g) {
        const auto v = pt.states[(std::size_t)g].vec();
        for (int i = 0; i < 9; ++i) row[1 + 9 * (std::size_t)g + (std::size_t)i] = v(i);
      }
      w.row(row);
    }
    w.close();
    files.outputs.push_back((cfg.name + "_states.csv"));
  }
  for (int g = 0; g < ng; ++g) {
    NoiseSpec noise = cfg.noise;
    const std::string fname = cfg.name + "_pmu_g" + std::to_string(g) + ".csv";
    CsvWriter w(outdir / fname,
                {"t", "y1", "y2", "y3", "y4", "y5", "y6", "u1", "u2"});
    for (const ObsInput& in : make_inputs(tr, g, cfg.fs, noise))
      w.row({in.y.t, in.y.y1, in.y.y2, in.y.y3, in.y.y4, in.y.y5, in.y.y6, in.u1,
             *in.u2});
    w.close();
    files.outputs.push_back(fname);
  }

  const double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
  detail::write_manifest(outdir, cfg, files, wall_ms, "simulate");
  files.outputs.push_back(cfg.name + "_manifest.json");
  return files;
}

/// Parse an observer input stream from a PMU CSV (columns t,y1..y6 with
/// optional u1,u2).
inline std::vector<ObsInput> read_pmu_csv(const std::filesystem::path& path,
                                          double fallback_u1) {
  const CsvData data = read_csv(path);
  const char* needed[] = {"t", "y1", "y2", "y3", "y4", "y5", "y6"};
  for (const char* n : needed)
    if (data.col(n) < 0)
      throw std::runtime_error("pmu input: missing column '" + std::string(n) + "'");
  const int cu1 = data.col("u1");
  const int cu2 = data.col("u2");
  std::vector<ObsInput> in;
  in.reserve(data.rows.size());
  for (const auto& r : data.rows) {
    ObsInput u;
    u.y.t = r[(std::size_t)data.col("t")];
    u.y.y1 = r[(std::size_t)data.col("y1")];
    u.y.y2 = r[(std::size_t)data.col("y2")];
    u.y.y3 = r[(std::size_t)data.col("y3")];
    u.y.y4 = r[(std::size_t)data.col("y4")];
    u.y.y5 = r[(std::size_t)data.col("y5")];
    u.y.y6 = r[(std::size_t)data.col("y6")];
    u.u1 = cu1 >= 0 ? r[(std::size_t)cu1] : fallback_u1;
    if (cu2 >= 0) u.u2 = r[(std::size_t)cu2];
    in.push_back(u);
  }
  return in;
}

namespace detail {

inline void write_estimates_csv(const std::filesystem::path& path,
                                const std::vector<EstimateRecord>& recs) {
  CsvWriter w(path, {"t", "xh1", "xh2", "xh3", "xh4", "x1", "x2", "x3", "x4", "e1",
                     "e2", "e3", "e4"});
  for (const EstimateRecord& r : recs)
    w.row({r.t, r.xh1, r.xh2, r.xh3, r.xh4, r.x1, r.x2, r.x3, r.x4, r.e1, r.e2, r.e3,
           r.e4});
  w.close();
}

inline void write_metrics(const std::filesystem::path& path, const ErrorMetrics& m,
                          const std::vector<std::pair<std::string, double>>& extra) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("metrics: cannot open " + path.string());
  static const char* ch[] = {"x1", "x2", "x3", "x4"};
  for (int c = 0; c < 4; ++c) {
    out << "rmse_" << ch[c] << "=" << format_double(m.ch[c].rmse) << '\n';
    out << "settling_" << ch[c] << "=" << format_double(m.ch[c].settling_time) << '\n';
    out << "max_after_" << ch[c] << "=" << format_double(m.ch[c].max_after) << '\n';
  }
  out << "window_start=" << format_double(m.window_start) << '\n';
  out << "tol=" << format_double(m.tol) << '\n';
  for (const auto& [k, v] : extra) out << k << "=" << format_double(v) << '\n';
}

}  // namespace detail

/// Run the configured observers against the scenario (or an external PMU
/// stream aligned to its grid) and write estimate, log, and metric files.
inline RunResultFiles run_observe(const ScenarioConfig& cfg,
                                  const std::filesystem::path& outdir,
                                  const std::optional<std::filesystem::path>& pmu_input,
                                  std::ostream& diag = std::cerr) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(outdir);
  const Trajectory tr = integrate(cfg.sim);
  const int gen = cfg.observer.gen;

  std::vector<ObsInput> inputs;
  if (pmu_input)
    inputs = read_pmu_csv(*pmu_input, tr.u1[(std::size_t)gen]);
  else
    inputs = make_inputs(tr, gen, cfg.fs, cfg.noise);
  if (inputs.empty()) throw std::runtime_error("observe: empty PMU input stream");

  RunResultFiles files;
  const bool want_partial = cfg.observer.kind == "partial" || cfg.observer.kind == "both";
  const bool want_full = cfg.observer.kind == "full" || cfg.observer.kind == "both";

  if (want_partial) {
    const PartialRunResult res = run_partial_observer(
        tr, gen, inputs, cfg.observer.restart_period, cfg.observer.partial);
    const std::string est_name = cfg.name + "_estimates_partial.csv";
    detail::write_estimates_csv(outdir / est_name, res.records);
    files.outputs.push_back(est_name);
    const ErrorMetrics m = error_metrics(res.records, 2.0, 1e-3);
    const std::string met_name = cfg.name + "_metrics_partial.txt";
    detail::write_metrics(outdir / met_name, m,
                          {{"degenerate_steps", (double)res.degenerate_steps},
                           {"restarts", (double)res.restarts}});
    files.outputs.push_back(met_name);
  }
  if (want_full) {
    const FullRunResult res = run_full_observer(tr, gen, inputs, cfg.observer.full,
                                                cfg.observer.restart_period);
    const std::string est_name = cfg.name + "_estimates_full.csv";
    detail::write_estimates_csv(outdir / est_name, res.records);
    files.outputs.push_back(est_name);
    {
      const std::string log_name = cfg.name + "_estlog_full.csv";
      CsvWriter w(outdir / log_name,
                  {"t", "th1", "th2", "Delta", "z", "normF", "residual", "projected"});
      for (const FullObserverLog& l : res.logs)
        w.row({l.t, l.th1, l.th2, l.Delta, l.z, l.normF, l.residual,
               l.projected ? 1.0 : 0.0});
      w.close();
      files.outputs.push_back(log_name);
    }
    const ErrorMetrics m = error_metrics(res.records, 2.0, 1e-3);
    const std::string met_name = cfg.name + "_metrics_full.txt";
    detail::write_metrics(outdir / met_name, m,
                          {{"ie_reached", res.ie_reached ? 1.0 : 0.0},
                           {"t_c", res.t_c},
                           {"quad_min_eig", res.quad_min_eig},
                           {"restarts", (double)res.restarts}});
    files.outputs.push_back(met_name);
    if (!res.ie_reached) {
      const std::string w =
          "interval excitation not reached: parameter estimates are not certified";
      diag << "warning: " << w << '\n';
      files.warnings.push_back(w);
    }
  }

  const double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
  detail::write_manifest(outdir, cfg, files, wall_ms, "observe");
  files.outputs.push_back(cfg.name + "_manifest.json");
  return files;
}

}  // namespace sgobs

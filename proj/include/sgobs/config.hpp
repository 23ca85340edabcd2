#pragma once

// Scenario configuration: a single JSON file describes the plant, network,
// disturbances, sampling, and observer settings. Parsing is strict: unknown
// keys are errors, malformed values are errors, and nothing is silently
// coerced. Absent optional keys take the documented defaults.

#include "sgobs/drem.hpp"
#include "sgobs/observers.hpp"
#include "sgobs/simulator.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

namespace sgobs {

using Json = nlohmann::json;

struct ObserverSettings {
  std::string kind = "partial";  ///< "partial" | "full" | "both"
  int gen = 0;
  FullObserverConfig full;
  PartialObserverConfig partial;
  double restart_period = 0.0;  ///< 0 disables periodic extension restarts
};

struct ScenarioConfig {
  std::string name = "scenario";
  SimScenario sim;
  double fs = 60.0;
  NoiseSpec noise;
  ObserverSettings observer;

  void validate() const {
    if (fs <= 0.0) throw std::invalid_argument("config: fs must be positive");
    if (fs > 1.0 / sim.h + 1e-9)
      throw std::invalid_argument("config: fs must not exceed the plant rate 1/h");
    if (observer.kind != "partial" && observer.kind != "full" && observer.kind != "both")
      throw std::invalid_argument("config: observer.kind must be partial, full, or both");
    if (observer.gen < 0 || observer.gen >= (int)sim.gens.size())
      throw std::invalid_argument("config: observer.gen out of range");
  }
};

namespace detail {

inline void check_keys(const Json& j, const std::string& ctx,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument("config: " + ctx + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " + ctx);
}

template <typename T>
T get_or(const Json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw std::invalid_argument(std::string("config: malformed value for '") + key + "'");
  }
}

template <typename T>
T get_req(const Json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key))
    throw std::invalid_argument("config: missing required key '" + std::string(key) +
                                "' in " + ctx);
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw std::invalid_argument(std::string("config: malformed value for '") + key + "'");
  }
}

inline GenParams parse_gen_params(const Json& j) {
  check_keys(j, "generator params",
             {"H", "D", "Td0p", "Tq0p", "Xd", "Xdp", "Xq", "Xqp", "R", "w0", "KA",
              "TA", "TB", "TC", "Kp", "Tw", "T1", "T2", "T3", "T4"});
  GenParams p;
  p.H = get_or(j, "H", p.H);
  p.D = get_or(j, "D", p.D);
  p.Td0p = get_or(j, "Td0p", p.Td0p);
  p.Tq0p = get_or(j, "Tq0p", p.Tq0p);
  p.Xd = get_or(j, "Xd", p.Xd);
  p.Xdp = get_or(j, "Xdp", p.Xdp);
  p.Xq = get_or(j, "Xq", p.Xq);
  p.Xqp = get_or(j, "Xqp", p.Xqp);
  p.R = get_or(j, "R", p.R);
  p.w0 = get_or(j, "w0", p.w0);
  p.KA = get_or(j, "KA", p.KA);
  p.TA = get_or(j, "TA", p.TA);
  p.TB = get_or(j, "TB", p.TB);
  p.TC = get_or(j, "TC", p.TC);
  p.Kp = get_or(j, "Kp", p.Kp);
  p.Tw = get_or(j, "Tw", p.Tw);
  p.T1 = get_or(j, "T1", p.T1);
  p.T2 = get_or(j, "T2", p.T2);
  p.T3 = get_or(j, "T3", p.T3);
  p.T4 = get_or(j, "T4", p.T4);
  p.validate();
  return p;
}

inline FluctuationSpec parse_fluctuation(const Json& j) {
  check_keys(j, "fluctuation", {"sines", "steps", "ou"});
  FluctuationSpec f;
  if (j.contains("sines")) {
    for (const Json& s : j.at("sines")) {
      check_keys(s, "fluctuation.sines[]", {"freq", "amp"});
      f.sines.push_back({get_req<double>(s, "freq", "sine"), get_req<double>(s, "amp", "sine")});
    }
  }
  if (j.contains("steps")) {
    for (const Json& s : j.at("steps")) {
      check_keys(s, "fluctuation.steps[]", {"t", "factor"});
      f.steps.push_back({get_req<double>(s, "t", "step"), get_req<double>(s, "factor", "step")});
    }
  }
  if (j.contains("ou")) {
    const Json& o = j.at("ou");
    check_keys(o, "fluctuation.ou", {"sigma", "kappa", "amp"});
    f.ou.sigma = get_or(o, "sigma", 0.0);
    f.ou.kappa = get_or(o, "kappa", 1.0);
    f.ou.amp = get_or(o, "amp", 0.0);
  }
  f.validate();
  return f;
}

inline LsDremConfig<4> parse_estimator(const Json& j) {
  check_keys(j, "observer.estimator",
             {"gain_ls", "gain1", "gain2", "f0", "chi0", "k", "theta2_min",
              "theta2_sign", "theta_init"});
  LsDremConfig<4> c;
  // defaults tuned on the reference scenario; recorded here, overridable
  c.gain_ls = 500.0;
  c.gain1 = c.gain2 = 1.5;
  c.f0 = 10.0;
  c.chi0 = 0.5;
  c.k = 1.0;
  c.theta2_min = 0.1;
  c.theta2_sign = +1;
  c.theta_init = Vec2(0.0, 0.5);

  c.gain_ls = get_or(j, "gain_ls", c.gain_ls);
  c.gain1 = get_or(j, "gain1", c.gain1);
  c.gain2 = get_or(j, "gain2", c.gain2);
  c.f0 = get_or(j, "f0", c.f0);
  c.chi0 = get_or(j, "chi0", c.chi0);
  c.k = get_or(j, "k", c.k);
  c.theta2_min = get_or(j, "theta2_min", c.theta2_min);
  c.theta2_sign = get_or(j, "theta2_sign", c.theta2_sign);
  if (j.contains("theta_init")) {
    const auto v = get_req<std::vector<double>>(j, "theta_init", "estimator");
    if (v.size() != 2)
      throw std::invalid_argument("config: theta_init must have two entries");
    c.theta_init = Vec2(v[0], v[1]);
  }
  c.validate();
  return c;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const Json& j) {
  using detail::check_keys;
  using detail::get_or;
  using detail::get_req;

  check_keys(j, "scenario",
             {"name", "T", "h", "fs", "seed", "network", "generators", "fluctuation",
              "noise", "observer", "divergence_bound", "x2_kick"});
  ScenarioConfig cfg;
  cfg.name = get_req<std::string>(j, "name", "scenario");
  cfg.sim.T = get_req<double>(j, "T", "scenario");
  cfg.sim.h = get_req<double>(j, "h", "scenario");
  cfg.fs = get_req<double>(j, "fs", "scenario");
  cfg.sim.seed = get_req<std::uint64_t>(j, "seed", "scenario");
  cfg.sim.divergence_bound = get_or(j, "divergence_bound", 50.0);

  const Json& net = j.at("network");
  const std::string kind = get_req<std::string>(net, "kind", "network");
  if (kind == "smib") {
    check_keys(net, "network", {"kind", "Vinf", "thinf", "Re", "Xe", "Gl", "Bl"});
    cfg.sim.smib = true;
    cfg.sim.smib_net.Vinf = get_or(net, "Vinf", 1.0);
    cfg.sim.smib_net.thinf = get_or(net, "thinf", 0.0);
    cfg.sim.smib_net.Re = get_req<double>(net, "Re", "network");
    cfg.sim.smib_net.Xe = get_req<double>(net, "Xe", "network");
    cfg.sim.smib_net.Gl = get_or(net, "Gl", 0.0);
    cfg.sim.smib_net.Bl = get_or(net, "Bl", 0.0);
    cfg.sim.smib_net.validate();
  } else if (kind == "multimachine") {
    check_keys(net, "network", {"kind", "n_bus", "lines", "loads", "inf_bus"});
    cfg.sim.smib = false;
    MultiMachineNetwork& m = cfg.sim.mm_net;
    m.n_bus = get_req<int>(net, "n_bus", "network");
    m.loads.assign(m.n_bus, Complex(0.0, 0.0));
    for (const Json& l : net.at("lines")) {
      check_keys(l, "network.lines[]", {"from", "to", "r", "x"});
      const double r = get_req<double>(l, "r", "line");
      const double x = get_req<double>(l, "x", "line");
      m.lines.push_back(
          {get_req<int>(l, "from", "line"), get_req<int>(l, "to", "line"), Complex(r, x)});
    }
    if (net.contains("loads")) {
      for (const Json& l : net.at("loads")) {
        check_keys(l, "network.loads[]", {"bus", "g", "b"});
        const int bus = get_req<int>(l, "bus", "load");
        if (bus < 0 || bus >= m.n_bus)
          throw std::invalid_argument("config: load bus out of range");
        m.loads[(std::size_t)bus] = Complex(get_req<double>(l, "g", "load"),
                                            get_req<double>(l, "b", "load"));
      }
    }
    if (net.contains("inf_bus")) {
      const Json& ib = net.at("inf_bus");
      check_keys(ib, "network.inf_bus", {"bus", "r", "x", "v", "angle"});
      m.inf_bus = get_req<int>(ib, "bus", "inf_bus");
      m.z_inf = Complex(get_req<double>(ib, "r", "inf_bus"),
                        get_req<double>(ib, "x", "inf_bus"));
      m.Vinf = get_or(ib, "v", 1.0);
      m.thinf = get_or(ib, "angle", 0.0);
    }
  } else {
    throw std::invalid_argument("config: network.kind must be smib or multimachine");
  }

  for (const Json& g : j.at("generators")) {
    detail::check_keys(g, "generators[]", {"bus", "params", "dispatch"});
    GenSetup gs;
    if (g.contains("params")) gs.params = detail::parse_gen_params(g.at("params"));
    const Json& d = g.at("dispatch");
    detail::check_keys(d, "generators[].dispatch", {"P", "V"});
    gs.dispatch.P = get_req<double>(d, "P", "dispatch");
    gs.dispatch.V = get_req<double>(d, "V", "dispatch");
    cfg.sim.gens.push_back(gs);
    if (!cfg.sim.smib) {
      cfg.sim.mm_net.gen_bus.push_back(get_req<int>(g, "bus", "generator"));
    } else if (g.contains("bus")) {
      throw std::invalid_argument("config: 'bus' is only valid for multimachine networks");
    }
  }
  if (cfg.sim.gens.empty()) throw std::invalid_argument("config: no generators");
  if (!cfg.sim.smib) cfg.sim.mm_net.validate();

  if (j.contains("x2_kick")) {
    const Json& k = j.at("x2_kick");
    if (!k.is_array())
      throw std::invalid_argument("config: x2_kick must be an array of numbers");
    for (const Json& v : k) {
      if (!v.is_number())
        throw std::invalid_argument("config: x2_kick must be an array of numbers");
      cfg.sim.x2_kick.push_back(v.get<double>());
    }
    if (cfg.sim.x2_kick.size() != cfg.sim.gens.size())
      throw std::invalid_argument("config: x2_kick needs one entry per generator");
  }

  if (j.contains("fluctuation")) cfg.sim.fluct = detail::parse_fluctuation(j.at("fluctuation"));

  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    check_keys(n, "noise", {"sigma_mag", "sigma_ang"});
    cfg.noise.sigma_mag = get_or(n, "sigma_mag", 0.0);
    cfg.noise.sigma_ang = get_or(n, "sigma_ang", 0.0);
    cfg.noise.validate();
  }
  cfg.noise.seed = cfg.sim.seed;

  if (j.contains("observer")) {
    const Json& o = j.at("observer");
    check_keys(o, "observer",
               {"kind", "gen", "estimator", "ie_delta", "restart_period"});
    cfg.observer.kind = get_or<std::string>(o, "kind", "partial");
    cfg.observer.gen = get_or(o, "gen", 0);
    if (o.contains("estimator"))
      cfg.observer.full.estimator = detail::parse_estimator(o.at("estimator"));
    else
      cfg.observer.full.estimator = detail::parse_estimator(Json::object());
    cfg.observer.full.ie_delta = get_or(o, "ie_delta", 1e-3);
    cfg.observer.restart_period = get_or(o, "restart_period", 0.0);
  } else {
    cfg.observer.full.estimator = detail::parse_estimator(Json::object());
  }

  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw std::invalid_argument("config: JSON parse error in " + path.string() + ": " +
                                e.what());
  }
  return parse_scenario(j);
}

}  // namespace sgobs

#pragma once

// Built-in scenario definitions. The JSON files under scenarios/ mirror these
// builders field for field; the acceptance suite runs the builders directly
// so the release gate does not depend on the working directory.

#include "sgobs/config.hpp"

namespace sgobs {

/// Reference single-machine case: moderately loaded round-ish rotor behind a
/// line, local load at the terminal bus, two slow sinusoidal load components
/// of about 2% combined amplitude, 60 Hz sampling, noiseless.
inline ScenarioConfig make_reference_smib() {
  ScenarioConfig cfg;
  cfg.name = "reference_smib";
  cfg.sim.T = 20.0;
  cfg.sim.h = 1e-3;
  cfg.fs = 60.0;
  cfg.sim.seed = 1;
  cfg.sim.smib = true;
  cfg.sim.smib_net.Vinf = 1.0;
  cfg.sim.smib_net.thinf = 0.0;
  cfg.sim.smib_net.Re = 0.01;
  cfg.sim.smib_net.Xe = 0.3;
  cfg.sim.smib_net.Gl = 0.25;
  cfg.sim.smib_net.Bl = -0.08;
  GenSetup gs;  // GenParams defaults are the reference machine
  gs.dispatch.P = 0.8;
  gs.dispatch.V = 1.0;
  cfg.sim.gens.push_back(gs);
  cfg.sim.fluct.sines = {{0.10, 0.015}, {0.23, 0.005}};
  cfg.observer.kind = "both";
  cfg.observer.gen = 0;
  cfg.observer.full.estimator.gain_ls = 500.0;
  cfg.observer.full.estimator.gain1 = 1.5;
  cfg.observer.full.estimator.gain2 = 1.5;
  cfg.observer.full.estimator.f0 = 10.0;
  cfg.observer.full.estimator.chi0 = 0.5;
  cfg.observer.full.estimator.k = 1.0;
  cfg.observer.full.estimator.theta2_min = 0.1;
  cfg.observer.full.estimator.theta2_sign = +1;
  cfg.observer.full.estimator.theta_init = Vec2(0.0, 0.5);
  cfg.observer.full.ie_delta = 1e-3;
  return cfg;
}

/// Reference case with zero stator resistance; exercises the closed-form
/// regressor construction.
inline ScenarioConfig make_r0_smib() {
  ScenarioConfig cfg = make_reference_smib();
  cfg.name = "r0_smib";
  cfg.sim.gens[0].params.R = 0.0;
  return cfg;
}

/// Reference case started off-equilibrium with a rotor-speed offset; used for
/// transient and convergence-order checks.
inline ScenarioConfig make_kicked_smib(double kick = 0.5, double T = 20.0) {
  ScenarioConfig cfg = make_reference_smib();
  cfg.name = "kicked_smib";
  cfg.sim.T = T;
  cfg.sim.x2_kick = {kick};
  return cfg;
}

/// Three identical machines on a triangle network with an external tie at
/// bus 0 and constant-impedance loads at every bus.
inline ScenarioConfig make_three_machine() {
  ScenarioConfig cfg;
  cfg.name = "three_machine";
  cfg.sim.T = 10.0;
  cfg.sim.h = 1e-3;
  cfg.fs = 60.0;
  cfg.sim.seed = 3;
  cfg.sim.smib = false;
  MultiMachineNetwork& m = cfg.sim.mm_net;
  m.n_bus = 3;
  m.lines = {{0, 1, Complex(0.005, 0.10)},
             {1, 2, Complex(0.006, 0.12)},
             {0, 2, Complex(0.004, 0.08)}};
  m.loads = {Complex(0.30, -0.05), Complex(0.45, -0.10), Complex(0.35, -0.08)};
  m.gen_bus = {0, 1, 2};
  m.inf_bus = 0;
  m.z_inf = Complex(0.002, 0.06);
  m.Vinf = 1.0;
  m.thinf = 0.0;
  GenSetup g;
  g.dispatch = {0.7, 1.0};
  cfg.sim.gens.push_back(g);
  g.dispatch = {0.6, 1.0};
  cfg.sim.gens.push_back(g);
  g.dispatch = {0.5, 1.0};
  cfg.sim.gens.push_back(g);
  cfg.sim.fluct.sines = {{0.10, 0.015}, {0.23, 0.005}};
  cfg.observer.kind = "partial";
  cfg.observer.gen = 1;
  return cfg;
}

/// Reference case with an additional stochastic load component and PMU
/// measurement noise; used for determinism checks and noisy-run studies.
inline ScenarioConfig make_noisy_smib() {
  ScenarioConfig cfg = make_reference_smib();
  cfg.name = "noisy_smib";
  cfg.sim.seed = 7;
  cfg.sim.fluct.ou = {0.01, 1.0, 0.02};
  cfg.noise.sigma_mag = 1e-4;
  cfg.noise.sigma_ang = 1e-4;
  cfg.noise.seed = 7;
  cfg.observer.kind = "partial";
  cfg.observer.restart_period = 30.0;
  return cfg;
}

}  // namespace sgobs

#pragma once

// Load-fluctuation processes: deterministic sinusoidal components, scheduled
// step changes, and a seeded Ornstein-Uhlenbeck term held constant over each
// plant step (exact discretization, clipped to a configured amplitude).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace sgobs {

struct SineTerm {
  double freq = 0.1;  ///< [Hz]
  double amp = 0.0;   ///< relative amplitude
};

struct StepTerm {
  double t = 0.0;      ///< switch time [s]
  double factor = 1.0; ///< multiplicative change applied from t onward
};

struct OuSpec {
  double sigma = 0.0;  ///< diffusion strength
  double kappa = 1.0;  ///< mean-reversion rate [1/s]
  double amp = 0.0;    ///< hard clip bound; 0 disables the process
};

struct FluctuationSpec {
  std::vector<SineTerm> sines;
  std::vector<StepTerm> steps;
  OuSpec ou;

  void validate() const {
    for (const auto& s : sines)
      if (s.amp < 0.0) throw std::invalid_argument("FluctuationSpec: sine amplitude must be nonnegative");
    if (ou.amp < 0.0 || ou.sigma < 0.0 || ou.kappa <= 0.0)
      throw std::invalid_argument("FluctuationSpec: OU parameters out of range");
  }
};

/// Multiplicative load-scaling process lambda(t) >= 0:
///   lambda(t) = (1 + ou_held + sum_i amp_i sin(2 pi f_i t)) * prod_{t_j <= t} factor_j.
/// The OU term advances once per plant step (zero-order held in between) using
/// the exact scheme x+ = e^{-kh} x + sigma*sqrt((1-e^{-2kh})/(2k)) * xi.
class LoadProcess {
 public:
  LoadProcess() = default;
  LoadProcess(FluctuationSpec spec, double h, std::uint64_t seed, std::uint64_t stream = 0)
      : spec_(std::move(spec)), h_(h) {
    spec_.validate();
    if (h <= 0.0) throw std::invalid_argument("LoadProcess: step must be positive");
    std::seed_seq sq{seed, stream, std::uint64_t{0x6f75} /* "ou" */};
    rng_.seed(sq);
    if (spec_.ou.amp > 0.0) {
      decay_ = std::exp(-spec_.ou.kappa * h_);
      drive_ = spec_.ou.sigma *
               std::sqrt((1.0 - std::exp(-2.0 * spec_.ou.kappa * h_)) / (2.0 * spec_.ou.kappa));
    }
  }

  /// Scaling factor at time t using the currently held OU value.
  double scale(double t) const {
    double v = 1.0 + ou_;
    for (const auto& s : spec_.sines) v += s.amp * std::sin(2.0 * M_PI * s.freq * t);
    for (const auto& st : spec_.steps)
      if (t >= st.t) v *= st.factor;
    return v;
  }

  /// Advance the held OU value by one plant step.
  void advance() {
    if (spec_.ou.amp <= 0.0) return;
    ou_ = decay_ * ou_ + drive_ * gauss_(rng_);
    ou_ = std::clamp(ou_, -spec_.ou.amp, spec_.ou.amp);
  }

  double ou_value() const { return ou_; }

 private:
  FluctuationSpec spec_;
  double h_ = 1e-3;
  double decay_ = 1.0;
  double drive_ = 0.0;
  double ou_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace sgobs

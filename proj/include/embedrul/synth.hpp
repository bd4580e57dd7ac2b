#pragma once

#include <cstdint>

#include "embedrul/series.hpp"

namespace embedrul {

/// Synthetic run-to-failure fleet. Every instance shares a fleet-level set
/// of base waveforms (two sinusoids per sensor) and gets its own life
/// length, phase offset, observation noise, and missingness. Degradation
/// is an additive per-sensor drift that switches on at onset_fraction of
/// the life and ramps to drift_magnitude at failure.
struct SynthConfig {
  std::size_t instances = 20;
  std::size_t sensors = 5;
  std::size_t life_min = 120;
  std::size_t life_max = 200;
  double onset_fraction = 0.7;   // rho: drift starts at round(rho * T)
  double drift_magnitude = 3.0;
  bool quadratic_drift = false;  // linear ramp by default
  double noise_sigma = 0.1;
  double missing_prob = 0.0;
  std::uint64_t seed = 1;
  std::string id_prefix = "synth";
};

/// Generates the fleet deterministically from config.seed; instance i
/// draws from its own derived stream, so fleets with more instances extend
/// smaller ones. Timestamps are 0, 1, ..., T−1.
std::vector<MultivariateSeries> generate_fleet(const SynthConfig& config);

}  // namespace embedrul

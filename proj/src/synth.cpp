#include "embedrul/synth.hpp"

#include <cmath>
#include <numbers>

namespace embedrul {

std::vector<MultivariateSeries> generate_fleet(const SynthConfig& config) {
  if (config.instances == 0)
    fail(ErrorKind::invalid_argument, "generate_fleet: no instances");
  if (config.sensors == 0)
    fail(ErrorKind::invalid_argument, "generate_fleet: no sensors");
  if (config.life_min < 2 || config.life_min > config.life_max)
    fail(ErrorKind::invalid_argument, "generate_fleet: bad life range");
  if (!(config.onset_fraction > 0.0 && config.onset_fraction < 1.0))
    fail(ErrorKind::invalid_argument, "generate_fleet: rho outside (0, 1)");
  if (config.noise_sigma < 0.0)
    fail(ErrorKind::invalid_argument, "generate_fleet: negative noise");
  if (!(config.missing_prob >= 0.0 && config.missing_prob < 1.0))
    fail(ErrorKind::invalid_argument, "generate_fleet: missing_prob outside [0, 1)");

  // Fleet-level waveform parameters, shared by every instance so that
  // healthy behavior clusters across the fleet.
  struct SensorWave {
    double amp1, period1, phase1;
    double amp2, period2, phase2;
    double drift_sign;
  };
  Rng fleet_rng(Rng::derive(config.seed, 0));
  std::vector<SensorWave> waves(config.sensors);
  for (SensorWave& wv : waves) {
    wv.amp1 = fleet_rng.uniform(0.6, 1.0);
    wv.period1 = fleet_rng.uniform(8.0, 20.0);
    wv.phase1 = fleet_rng.uniform(0.0, 2.0 * std::numbers::pi);
    wv.amp2 = fleet_rng.uniform(0.3, 0.7);
    wv.period2 = fleet_rng.uniform(25.0, 60.0);
    wv.phase2 = fleet_rng.uniform(0.0, 2.0 * std::numbers::pi);
    wv.drift_sign = fleet_rng.bernoulli(0.5) ? 1.0 : -1.0;
  }

  std::vector<MultivariateSeries> fleet;
  fleet.reserve(config.instances);
  for (std::size_t i = 0; i < config.instances; ++i) {
    Rng rng(Rng::derive(config.seed, 1 + i));
    const std::size_t life =
        config.life_min +
        std::size_t(rng.below(std::uint64_t(config.life_max - config.life_min + 1)));
    const double instance_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto onset =
        std::size_t(std::llround(config.onset_fraction * double(life)));

    MultivariateSeries s;
    s.instance_id = config.id_prefix + "-" + std::to_string(i + 1);
    s.timestamps.resize(life);
    s.values = Matrix(life, config.sensors);
    s.present = Matrix(life, config.sensors);

    for (std::size_t t = 0; t < life; ++t) {
      s.timestamps[t] = double(t);
      const std::size_t step = t + 1;  // 1-based time
      double ramp = 0.0;
      if (step > onset && life > onset) {
        const double frac = double(step - onset) / double(life - onset);
        ramp = config.quadratic_drift ? frac * frac : frac;
      }
      for (std::size_t j = 0; j < config.sensors; ++j) {
        const SensorWave& wv = waves[j];
        const double tt = double(t);
        double v = wv.amp1 * std::sin(2.0 * std::numbers::pi * tt / wv.period1 +
                                      wv.phase1 + instance_phase) +
                   wv.amp2 * std::sin(2.0 * std::numbers::pi * tt / wv.period2 +
                                      wv.phase2 + instance_phase);
        v += wv.drift_sign * config.drift_magnitude * ramp;
        if (config.noise_sigma > 0.0) v += config.noise_sigma * rng.normal();
        if (config.missing_prob > 0.0 && rng.bernoulli(config.missing_prob)) {
          s.values(t, j) = 0.0;
          s.present(t, j) = 0.0;
        } else {
          s.values(t, j) = v;
          s.present(t, j) = 1.0;
        }
      }
    }
    s.validate();
    fleet.push_back(std::move(s));
  }
  return fleet;
}

}  // namespace embedrul

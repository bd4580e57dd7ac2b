#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "embedrul/common.hpp"

namespace embedrul {

/// splitmix64 step; used for seed expansion and stream derivation.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** seeded through splitmix64. Every consumer receives an
/// explicit instance; there is no process-global generator. The stream is
/// a pure function of the seed, independent of platform and standard
/// library, so equal seeds reproduce runs bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  /// Derives an independent child seed for stream `index` (per-instance
  /// noise, per-epoch shuffles, ...). Pure function of (seed, index).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t sm = seed ^ (0xA0761D6478BD642FULL * (index + 1));
    return splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) fail(ErrorKind::invalid_argument, "Rng::uniform: lo > hi");
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer in [0, n). n == 0 is invalid.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) fail(ErrorKind::invalid_argument, "Rng::below: n == 0");
    return std::uint64_t((__uint128_t(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; consumes exactly two words per draw.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace embedrul

#pragma once

#include <cstdint>
#include <random>

namespace topo3d {

// Seeded generator whose derived draws are spelled out explicitly, so that a
// seed reproduces the same stream on every platform (std::*_distribution
// implementations differ between standard libraries).
// Independent child seed for (stream, index), via splitmix64 finalisation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Box-Muller, cosine branch only; one normal per two uniforms.
  double normal(double mean, double stddev);

  // Inversion of the Poisson CDF.
  std::int64_t poisson(double lambda);

 private:
  std::mt19937_64 engine_;
};

}  // namespace topo3d

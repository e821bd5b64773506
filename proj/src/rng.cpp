#include "topo3d/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "topo3d/error.hpp"

namespace topo3d {

namespace {
std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return mix(mix(mix(base) ^ stream) ^ index);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  require(hi >= lo, "uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return lo + static_cast<std::int64_t>(draw % span);
}

double Rng::normal(double mean, double stddev) {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * radius * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::poisson(double lambda) {
  require(lambda > 0.0, "poisson: lambda must be positive");
  const double u = uniform01();
  std::int64_t k = 0;
  double p = std::exp(-lambda);
  double cdf = p;
  while (u > cdf) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
    // Tail mass below double resolution; stop at the last representable step.
    if (p == 0.0 && static_cast<double>(k) > lambda) break;
  }
  return k;
}

}  // namespace topo3d

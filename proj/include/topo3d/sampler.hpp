#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "topo3d/domain.hpp"
#include "topo3d/rng.hpp"

namespace topo3d {

struct SamplerConfig {
  double vf_mean = 0.28;
  double vf_std = 0.07;
  double vf_min = 0.07;
  double vf_max = 0.5;
  double load_lambda = 4.0;
  int load_min = 1;
  int load_max = 10;
  // Upper bounds of the in-face fractional coordinate ranges, per axis.
  std::array<double, 3> anchor_fraction_max{1.0, 0.5, 0.5};
};

void validate_sampler(const SamplerConfig& config);

// Normal draw, redrawn until inside [vf_min, vf_max].
double sample_volume_fraction(Rng& rng, const SamplerConfig& config = {});

std::vector<Load> sample_loads(Rng& rng, const DesignDomain& domain,
                               const SamplerConfig& config = {});

// Draw order: volume fraction, loads, constraint case. The generator is
// seeded from `seed`, which is recorded in the result.
ProblemSpec sample_problem(std::uint64_t seed, const DesignDomain& domain,
                           const SamplerConfig& config = {});

ProblemSpec sample_problem(Rng& rng, std::uint64_t seed, const DesignDomain& domain,
                           const SamplerConfig& config = {});

}  // namespace topo3d

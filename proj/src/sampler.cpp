#include "topo3d/sampler.hpp"

#include <cmath>

#include "topo3d/error.hpp"

namespace topo3d {

void validate_sampler(const SamplerConfig& c) {
  require(c.vf_std > 0.0, "sampler: vf_std must be positive", ErrorCode::invalid_config);
  require(c.vf_min < c.vf_max && c.vf_min >= kMinVolumeFraction &&
              c.vf_max <= kMaxVolumeFraction,
          "sampler: volume fraction clamp must be ordered inside [0.07, 0.5]",
          ErrorCode::invalid_config);
  require(c.load_lambda > 0.0, "sampler: load_lambda must be positive", ErrorCode::invalid_config);
  require(c.load_min >= 1 && c.load_min <= c.load_max &&
              c.load_max <= static_cast<int>(kMaxLoads),
          "sampler: load count clamp must be ordered inside [1, 10]", ErrorCode::invalid_config);
  for (double f : c.anchor_fraction_max)
    require(f > 0.0 && f <= 1.0, "sampler: anchor fractions must be in (0, 1]",
            ErrorCode::invalid_config);
}

double sample_volume_fraction(Rng& rng, const SamplerConfig& c) {
  while (true) {
    const double v = rng.normal(c.vf_mean, c.vf_std);
    if (v >= c.vf_min && v <= c.vf_max) return v;
  }
}

std::vector<Load> sample_loads(Rng& rng, const DesignDomain& domain, const SamplerConfig& c) {
  std::int64_t count = 0;
  do {
    count = rng.poisson(c.load_lambda);
  } while (count < c.load_min || count > c.load_max);

  std::vector<Load> loads;
  loads.reserve(static_cast<std::size_t>(count));
  for (std::int64_t l = 0; l < count; ++l) {
    Load load;
    Vec3 dir{};
    double norm = 0.0;
    // A zero draw has probability ~2^-159; redraw rather than divide by it.
    while (norm == 0.0) {
      for (auto& v : dir) v = rng.uniform01();
      norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    }
    for (int a = 0; a < 3; ++a) load.direction[a] = dir[a] / norm;
    load.magnitude = rng.uniform01() < 0.5 ? 1.0 : -1.0;
    load.face = static_cast<Face>(rng.uniform_int(0, 5));
    const int normal_axis = static_cast<int>(load.face) / 2;
    const int axis_u = normal_axis == 0 ? 1 : 0;
    const int axis_v = normal_axis == 2 ? 1 : 2;
    load.u = rng.uniform(0.0, c.anchor_fraction_max[axis_u]);
    load.v = rng.uniform(0.0, c.anchor_fraction_max[axis_v]);
    // Snap to the node grid so the stored anchor is the applied one.
    const int nu = axis_u == 0 ? domain.nx : (axis_u == 1 ? domain.ny : domain.nz);
    const int nv = axis_v == 1 ? domain.ny : domain.nz;
    load.u = static_cast<double>(std::lround(load.u * nu)) / nu;
    load.v = static_cast<double>(std::lround(load.v * nv)) / nv;
    loads.push_back(load);
  }
  return loads;
}

ProblemSpec sample_problem(Rng& rng, std::uint64_t seed, const DesignDomain& domain,
                           const SamplerConfig& config) {
  validate_sampler(config);
  ProblemSpec p;
  p.domain = domain;
  p.seed = seed;
  p.volume_fraction = sample_volume_fraction(rng, config);
  p.loads = sample_loads(rng, domain, config);
  p.bc_case = static_cast<int>(rng.uniform_int(1, 4));
  return p;
}

ProblemSpec sample_problem(std::uint64_t seed, const DesignDomain& domain,
                           const SamplerConfig& config) {
  Rng rng(seed);
  return sample_problem(rng, seed, domain, config);
}

}  // namespace topo3d

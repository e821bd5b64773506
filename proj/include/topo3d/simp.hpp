#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "topo3d/domain.hpp"
#include "topo3d/fea.hpp"

namespace topo3d {

// Per-element scalar in [0, 1], element order of DesignDomain.
using DensityField = std::vector<double>;

// Neighbourhood weights h_ij = r_min - dist(i, j) over element centres within
// r_min, stored CSR-style. Every element contains itself.
class FilterKernel {
 public:
  FilterKernel(const DesignDomain& domain, double r_min);

  double radius() const { return r_min_; }
  std::size_t size() const { return offsets_.size() - 1; }

  // x~_i = sum_j h_ij v_j x_j / sum_j h_ij v_j
  DensityField apply(std::span<const double> x) const;

  // Chain rule through the filter: returns d(objective)/dx given d/dx~.
  std::vector<double> backpropagate(std::span<const double> d_filtered) const;

  std::span<const std::size_t> neighbours(std::size_t i) const {
    return {neighbours_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const double> weights(std::size_t i) const {
    return {weights_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

 private:
  double r_min_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> neighbours_;
  std::vector<double> weights_;  // h_ij * v_j
  std::vector<double> totals_;   // sum_j h_ij * v_j
};

DensityField density_filter(std::span<const double> x, const FilterKernel& kernel);

struct OcOptions {
  double move = 0.2;
  double damping = 0.5;
  double volume_tol = 1e-6;  // fraction of V
};

// Optimality-criteria step. `dc` and `dv` are sensitivities w.r.t. the design
// variables (already chained through the filter). Lagrange multiplier found by
// bisection so that the filtered volume equals v0 * V.
DensityField oc_update(std::span<const double> x, std::span<const double> dc,
                       std::span<const double> dv, double volume_fraction,
                       const FilterKernel& kernel, const DesignDomain& domain,
                       const OcOptions& options = {});

// Filtered volume sum_i x~_i v_i.
double filtered_volume(std::span<const double> x, const FilterKernel& kernel,
                       const DesignDomain& domain);

struct SimpConfig {
  MaterialModel material;
  double r_min_factor = 1.5;  // in element edge lengths
  double move = 0.2;
  double damping = 0.5;
  double change_tol = 0.0075;  // on max |x~_t - x~_{t-1}|
  std::size_t max_iterations = 200;
  double pcg_tol = 1e-8;
};

struct TraceEntry {
  std::size_t iteration = 0;
  DensityField density;  // physical (filtered) densities x~
  double compliance = 0.0;
  double max_change = 0.0;  // max |x~_t - x~_{t-1}|, 0 for entry 0
  double wall_ms = 0.0;     // time spent producing this entry
  std::size_t pcg_iterations = 0;
};

struct IterationTrace {
  ProblemSpec problem;
  std::vector<TraceEntry> entries;
  bool converged = false;

  std::size_t final_iteration() const { return entries.empty() ? 0 : entries.size() - 1; }
  const DensityField& final_density() const { return entries.back().density; }
};

// Called after every recorded entry; returning false stops the run early.
using TraceObserver = std::function<bool(const TraceEntry&)>;

IterationTrace run_simp(const ProblemSpec& problem, const SimpConfig& config,
                        const TraceObserver& observer = {});

}  // namespace topo3d

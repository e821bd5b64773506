#include "topo3d/simp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace topo3d {

FilterKernel::FilterKernel(const DesignDomain& d, double r_min) : r_min_(r_min) {
  require(r_min > 0.0, "filter: radius must be positive");
  const int reach = static_cast<int>(std::floor(r_min / d.h + 1e-9));
  const double v = d.element_volume();
  const auto ne = d.element_count();
  offsets_.reserve(ne + 1);
  offsets_.push_back(0);
  totals_.reserve(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto [i, j, k] = d.element_coord(e);
    double total = 0.0;
    for (int dk = -reach; dk <= reach; ++dk) {
      for (int dj = -reach; dj <= reach; ++dj) {
        for (int di = -reach; di <= reach; ++di) {
          const int a = i + di, b = j + dj, c = k + dk;
          if (a < 0 || b < 0 || c < 0 || a >= d.nx || b >= d.ny || c >= d.nz) continue;
          const double dist = d.h * std::sqrt(static_cast<double>(di * di + dj * dj + dk * dk));
          const double w = r_min - dist;
          if (w <= 0.0) continue;
          neighbours_.push_back(d.element_index(a, b, c));
          weights_.push_back(w * v);
          total += w * v;
        }
      }
    }
    offsets_.push_back(neighbours_.size());
    totals_.push_back(total);
  }
}

DensityField FilterKernel::apply(std::span<const double> x) const {
  require(x.size() == size(), "filter: field length mismatch", ErrorCode::shape_mismatch);
  DensityField out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Weighted mean written as x_i plus weighted deviations: constants map to
    // themselves exactly and the result stays inside [min x, max x].
    double acc = 0.0;
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
      acc += weights_[p] * (x[neighbours_[p]] - x[i]);
    out[i] = x[i] + acc / totals_[i];
  }
  return out;
}

std::vector<double> FilterKernel::backpropagate(std::span<const double> g) const {
  require(g.size() == size(), "filter: field length mismatch", ErrorCode::shape_mismatch);
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = g[i] / totals_[i];
    for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p)
      out[neighbours_[p]] += weights_[p] * gi;
  }
  return out;
}

DensityField density_filter(std::span<const double> x, const FilterKernel& kernel) {
  return kernel.apply(x);
}

double filtered_volume(std::span<const double> x, const FilterKernel& kernel,
                       const DesignDomain& domain) {
  const auto xf = kernel.apply(x);
  double s = 0.0;
  for (double v : xf) s += v;
  return s * domain.element_volume();
}

DensityField oc_update(std::span<const double> x, std::span<const double> dc,
                       std::span<const double> dv, double volume_fraction,
                       const FilterKernel& kernel, const DesignDomain& domain,
                       const OcOptions& options) {
  const auto n = x.size();
  require(dc.size() == n && dv.size() == n && kernel.size() == n,
          "oc_update: field length mismatch", ErrorCode::shape_mismatch);
  const double target = volume_fraction * domain.volume();

  std::vector<double> ratio(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    require(dv[i] > 0.0, "oc_update: volume sensitivity must be positive");
    ratio[i] = std::max(0.0, -dc[i]) / dv[i];
    scale = std::max(scale, ratio[i]);
  }
  require(scale > 0.0 && std::isfinite(scale), "oc_update: sensitivities are all zero or non-finite",
          ErrorCode::non_finite);

  DensityField next(n);
  auto update = [&](double lambda) {
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = std::max(0.0, x[i] - options.move);
      const double hi = std::min(1.0, x[i] + options.move);
      const double candidate = x[i] * std::pow(ratio[i] / lambda, options.damping);
      next[i] = std::clamp(candidate, lo, hi);
    }
    return filtered_volume(next, kernel, domain);
  };

  // Volume is non-increasing in lambda: bracket by decades, then bisect in log space.
  double lo = scale, hi = scale;
  int guard = 0;
  while (update(lo) < target) {
    lo /= 10.0;
    if (++guard > 400) fail(ErrorCode::internal, "oc_update: cannot bracket the multiplier from below");
  }
  guard = 0;
  while (update(hi) > target) {
    hi *= 10.0;
    if (++guard > 400) fail(ErrorCode::internal, "oc_update: cannot bracket the multiplier from above");
  }
  const double tol = options.volume_tol * domain.volume();
  double mid = std::sqrt(lo * hi);
  for (int it = 0; it < 400; ++it) {
    mid = std::sqrt(lo * hi);
    const double vol = update(mid);
    if (std::abs(vol - target) <= tol) return next;
    if (vol > target) lo = mid; else hi = mid;
    if (hi / lo - 1.0 < 1e-15) break;
  }
  const double vol = update(mid);
  if (std::abs(vol - target) > 1e-4 * domain.volume())
    fail(ErrorCode::internal, "oc_update: bisection did not meet the volume constraint");
  return next;
}

IterationTrace run_simp(const ProblemSpec& problem, const SimpConfig& config,
                        const TraceObserver& observer) {
  using clock = std::chrono::steady_clock;
  validate_problem(problem);
  validate_material(config.material);
  require(config.max_iterations >= 1, "run_simp: iteration cap must be >= 1");
  require(config.change_tol > 0.0, "run_simp: change tolerance must be positive");

  const auto& domain = problem.domain;
  const auto dofs = fixed_dofs_for_case(problem.bc_case, domain);
  auto forces = assemble_forces(problem);
  {
    double free_norm = 0.0;
    for (std::size_t i = 0; i < forces.size(); ++i)
      if (!dofs.fixed_mask[i]) free_norm += forces[i] * forces[i];
    require(free_norm > 0.0, "run_simp: no load acts on a free DOF");
  }

  const FilterKernel kernel(domain, config.r_min_factor * domain.h);
  StiffnessOperator stiffness(domain, config.material);
  const std::vector<double> element_volumes(domain.element_count(), domain.element_volume());
  const auto dv = kernel.backpropagate(element_volumes);

  OcOptions oc;
  oc.move = config.move;
  oc.damping = config.damping;

  SolveOptions solve;
  solve.tol = config.pcg_tol;

  IterationTrace trace;
  trace.problem = problem;

  DensityField x(domain.element_count(), problem.volume_fraction);
  std::vector<double> u;
  DensityField previous;
  auto mark = clock::now();
  for (std::size_t t = 0;; ++t) {
    const auto filtered = kernel.apply(x);
    double change = 0.0;
    for (std::size_t i = 0; i < previous.size(); ++i)
      change = std::max(change, std::abs(filtered[i] - previous[i]));
    stiffness.set_densities(filtered);
    SolveStats stats;
    try {
      u = solve_equilibrium(stiffness, forces, dofs, solve, &stats, u);
    } catch (const SolveError& e) {
      throw SolveError("run_simp: iteration " + std::to_string(t) + ": " + e.what(),
                       e.residual_history);
    }
    auto result = compliance_and_sensitivity(stiffness, u, filtered);

    TraceEntry entry;
    entry.iteration = t;
    entry.density = filtered;
    entry.compliance = result.compliance;
    entry.max_change = change;
    entry.pcg_iterations = stats.iterations;
    const auto now = clock::now();
    entry.wall_ms = std::chrono::duration<double, std::milli>(now - mark).count();
    trace.entries.push_back(std::move(entry));
    const bool keep_going = observer ? observer(trace.entries.back()) : true;

    if (t >= 1 && change < config.change_tol) {
      trace.converged = true;
      break;
    }
    if (t >= config.max_iterations || !keep_going) break;

    const auto dc = kernel.backpropagate(result.sensitivity);
    x = oc_update(x, dc, dv, problem.volume_fraction, kernel, domain, oc);
    previous = filtered;
    mark = now;
  }
  return trace;
}

}  // namespace topo3d

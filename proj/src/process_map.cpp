#include "topo3d/process_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "topo3d/error.hpp"

namespace topo3d {

namespace {

ProgressCurve make_curve(const IterationTrace& trace) {
  require(!trace.entries.empty(), "process map: empty trace");
  ProgressCurve c;
  const double T = static_cast<double>(trace.final_iteration());
  for (const auto& e : trace.entries) {
    c.iterations.push_back(e.iteration);
    c.progress.push_back(T > 0 ? static_cast<double>(e.iteration) / T : 1.0);
  }
  return c;
}

double frobenius_difference(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

ProgressCurve binary_accuracy_curve(const IterationTrace& trace, double threshold) {
  auto c = make_curve(trace);
  const auto& final_field = trace.final_density();
  for (const auto& e : trace.entries) {
    std::size_t agree = 0;
    for (std::size_t i = 0; i < final_field.size(); ++i)
      agree += (e.density[i] >= threshold) == (final_field[i] >= threshold);
    c.values.push_back(static_cast<double>(agree) / static_cast<double>(final_field.size()));
  }
  return c;
}

ProgressCurve gradient_norm_curve(const IterationTrace& trace) {
  require(trace.entries.size() >= 2, "gradient_norm_curve: trace needs at least two entries");
  auto c = make_curve(trace);
  c.values.push_back(0.0);
  for (std::size_t t = 1; t < trace.entries.size(); ++t)
    c.values.push_back(frobenius_difference(trace.entries[t].density, trace.entries[t - 1].density));
  c.values[0] = c.values[1];
  return c;
}

std::vector<double> spatial_map(std::span<const double> x, const FilterKernel& kernel) {
  auto out = kernel.apply(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - out[i];
  return out;
}

ProgressCurve spatial_gradient_norm_curve(const IterationTrace& trace, const FilterKernel& kernel) {
  require(trace.entries.size() >= 2, "spatial gradient curve: trace needs at least two entries");
  auto c = make_curve(trace);
  auto previous = spatial_map(trace.entries[0].density, kernel);
  c.values.push_back(0.0);
  for (std::size_t t = 1; t < trace.entries.size(); ++t) {
    auto current = spatial_map(trace.entries[t].density, kernel);
    c.values.push_back(frobenius_difference(current, previous));
    previous = std::move(current);
  }
  c.values[0] = c.values[1];
  return c;
}

bool CutoffMonitor::observe(std::size_t iteration, std::span<const double> x) {
  auto current = spatial_map(x, *kernel_);
  bool fires = false;
  if (!previous_.empty()) {
    last_norm_ = frobenius_difference(current, previous_);
    if (!fired_ && last_norm_ <= tau_) {
      fired_ = true;
      cutoff_ = iteration;
      fires = true;
    }
  }
  previous_ = std::move(current);
  return fires;
}

Cutoff cutoff_iteration(const IterationTrace& trace, const FilterKernel& kernel, double tau) {
  require(trace.entries.size() >= 2, "cutoff_iteration: trace needs at least two entries");
  CutoffMonitor monitor(kernel, tau);
  for (const auto& e : trace.entries) {
    if (monitor.observe(e.iteration, e.density)) return {e.iteration, true};
  }
  return {trace.final_iteration(), false};
}

ProgressCurve normalized(const ProgressCurve& curve) {
  ProgressCurve out = curve;
  double peak = 0.0;
  for (double v : curve.values) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out.values) v /= peak;
  return out;
}

std::string curve_to_csv(const ProgressCurve& curve) {
  std::string out = "progress,iteration,value\n";
  char buf[96];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g\n", curve.progress[i], curve.iterations[i],
                  curve.values[i]);
    out += buf;
  }
  return out;
}

ProgressCurve curve_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "progress,iteration,value",
          "curve csv: bad header", ErrorCode::io);
  ProgressCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double p = 0, v = 0;
    std::size_t it = 0;
    require(std::sscanf(line.c_str(), "%lf,%zu,%lf", &p, &it, &v) == 3, "curve csv: bad row",
            ErrorCode::io);
    c.progress.push_back(p);
    c.iterations.push_back(it);
    c.values.push_back(v);
  }
  return c;
}

}  // namespace topo3d

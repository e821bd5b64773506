#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "topo3d/simp.hpp"

namespace topo3d {

struct ProgressCurve {
  std::vector<std::size_t> iterations;
  std::vector<double> progress;  // t / T
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

// Binary accuracy of every iterate against the final field, both thresholded.
ProgressCurve binary_accuracy_curve(const IterationTrace& trace, double threshold = 0.5);

// ||x(t) - x(t-1)||_F, with value(0) := value(1).
ProgressCurve gradient_norm_curve(const IterationTrace& trace);

// x' = x - filter(x)
std::vector<double> spatial_map(std::span<const double> x, const FilterKernel& kernel);

// ||x'(t) - x'(t-1)||_F, with value(0) := value(1).
ProgressCurve spatial_gradient_norm_curve(const IterationTrace& trace, const FilterKernel& kernel);

struct Cutoff {
  std::size_t iteration = 0;
  bool reached = false;  // false: no iterate met tau, iteration = T
};

Cutoff cutoff_iteration(const IterationTrace& trace, const FilterKernel& kernel, double tau = 0.05);

// Online form of the cutoff detector, fed one iterate at a time.
class CutoffMonitor {
 public:
  CutoffMonitor(const FilterKernel& kernel, double tau) : kernel_(&kernel), tau_(tau) {}

  // Returns true the first time the detector fires.
  bool observe(std::size_t iteration, std::span<const double> x);

  bool fired() const { return fired_; }
  std::size_t cutoff() const { return cutoff_; }
  double last_norm() const { return last_norm_; }

 private:
  const FilterKernel* kernel_;
  double tau_;
  std::vector<double> previous_;
  bool fired_ = false;
  std::size_t cutoff_ = 0;
  double last_norm_ = 0.0;
};

// Values divided by the curve maximum, for plotting only.
ProgressCurve normalized(const ProgressCurve& curve);

// Header `progress,iteration,value`, 17 significant digits.
std::string curve_to_csv(const ProgressCurve& curve);
ProgressCurve curve_from_csv(const std::string& text);

}  // namespace topo3d

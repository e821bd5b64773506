#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topo3d/dataset.hpp"
#include "topo3d/net.hpp"
#include "topo3d/simp.hpp"

namespace topo3d {

// Values exactly at the threshold count as solid.
double binary_accuracy(std::span<const double> pred, std::span<const double> target,
                       double threshold = 0.5);
double binary_accuracy(std::span<const double> pred, std::span<const float> target,
                       double threshold = 0.5);

// 1 - sqrt(mean((target - pred)^2))
double rms_accuracy(std::span<const double> pred, std::span<const double> target);
double rms_accuracy(std::span<const double> pred, std::span<const float> target);

struct MetricReport {
  double binary_accuracy = 0.0;
  double rms_accuracy = 0.0;
  std::size_t samples = 0;
  double threshold = 0.5;
  bool operator==(const MetricReport&) const = default;
};

// Per-record metrics averaged over the records.
MetricReport evaluate(Network& network, const NetworkParameters& params,
                      std::span<const SampleRecord> records, double threshold = 0.5);

// Input groups: density -> {0}, gradient -> {1}, boundary -> forces and constraints.
enum ChannelGroup : unsigned { kGroupDensity = 1, kGroupGradient = 2, kGroupBoundary = 4 };

std::vector<int> channels_for(unsigned groups);
unsigned parse_channel_groups(const std::string& csv);  // "density,gradient"
std::string channel_groups_name(unsigned groups);        // "density+gradient"

// The seven non-empty group combinations, singles first.
std::vector<unsigned> all_channel_subsets();

// Same layers, first layer widened or narrowed to the given input channels.
NetworkConfig with_channels(const NetworkConfig& config, std::vector<int> channels);

struct LabeledReport {
  std::string label;
  MetricReport report;
  bool operator==(const LabeledReport&) const = default;
};

// Header `label,binary_accuracy,rms_accuracy,samples,threshold`.
std::string reports_to_csv(std::span<const LabeledReport> rows);
std::vector<LabeledReport> reports_from_csv(const std::string& text);

struct AblationOptions {
  bool augment = false;
  double augment_fraction = 0.4;
  std::uint64_t augment_seed = 0;
  double threshold = 0.5;
};

// One network per subset, trained on `train` and scored on `test`.
std::vector<LabeledReport> ablation_study(std::span<const SampleRecord> train_records,
                                          std::span<const SampleRecord> test_records,
                                          std::span<const unsigned> subsets,
                                          const NetworkConfig& net, const TrainConfig& config,
                                          const AblationOptions& options = {});

struct IterationGrid {
  std::vector<std::size_t> m_list;
  std::vector<std::size_t> n_list;
  // Row-major |m| x |n|; nullopt on the diagonal.
  std::vector<std::optional<double>> binary;
  std::vector<std::optional<double>> rms;

  std::optional<double> binary_at(std::size_t i, std::size_t j) const {
    return binary[i * n_list.size() + j];
  }
  std::optional<double> rms_at(std::size_t i, std::size_t j) const {
    return rms[i * n_list.size() + j];
  }
};

IterationGrid iteration_grid(std::span<const IterationTrace> traces, Network& network,
                             const NetworkParameters& params, std::span<const std::size_t> m_list,
                             std::span<const std::size_t> n_list, double threshold = 0.5);

// Matrix layout, `m\n` corner, `-` for absent cells.
std::string grid_to_csv(const IterationGrid& grid, bool rms);

// Count of places where accuracy drops as m grows, per n column.
std::vector<std::size_t> grid_inversions(const IterationGrid& grid);

// Records for every trace at a fixed (m, n).
std::vector<SampleRecord> fixed_pair_records(std::span<const IterationTrace> traces, std::size_t m,
                                             std::size_t n);

// `pairs_per_trace` draws per trace with the given strategy.
std::vector<SampleRecord> strategy_records(std::span<const IterationTrace> traces,
                                           PairStrategy strategy, std::size_t pairs_per_trace,
                                           std::uint64_t seed);

// One network per strategy; every one is scored on `test`.
std::vector<LabeledReport> strategy_comparison(std::span<const IterationTrace> train_traces,
                                               std::span<const SampleRecord> test_records,
                                               std::span<const PairStrategy> strategies,
                                               std::size_t pairs_per_trace,
                                               const NetworkConfig& net, const TrainConfig& config,
                                               std::uint64_t seed, double threshold = 0.5);

struct HybridOptions {
  double tau = 0.05;
  std::size_t gap = 5;
  double threshold = 0.5;
};

struct HybridResult {
  std::uint64_t seed = 0;
  std::size_t cutoff = 0;
  bool fallback = false;  // cutoff never reached: full solve used, speedup 0
  std::size_t final_iteration = 0;
  double cutoff_ms = 0.0;
  double inference_ms = 0.0;
  double full_ms = 0.0;
  double speedup = 0.0;
  MetricReport metrics;
  Prediction prediction;
  std::vector<double> ground_truth;
};

// One solver run feeds both the online cutoff and the converged reference.
HybridResult hybrid_run(const ProblemSpec& problem, const SimpConfig& simp, Network& network,
                        const NetworkParameters& params, const HybridOptions& options = {});

// Deterministic columns only.
std::string hybrid_to_csv(std::span<const HybridResult> results);
// Wall-clock columns and speedup.
std::string hybrid_timing_csv(std::span<const HybridResult> results);

}  // namespace topo3d

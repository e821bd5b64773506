#include "topo3d/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "topo3d/error.hpp"
#include "topo3d/process_map.hpp"

namespace topo3d {

namespace {

template <typename T>
double binary_impl(std::span<const double> pred, std::span<const T> target, double threshold) {
  require(pred.size() == target.size() && !pred.empty(), "binary_accuracy: shape mismatch",
          ErrorCode::shape_mismatch);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    agree += (pred[i] >= threshold) == (static_cast<double>(target[i]) >= threshold);
  return static_cast<double>(agree) / static_cast<double>(pred.size());
}

template <typename T>
double rms_impl(std::span<const double> pred, std::span<const T> target) {
  require(pred.size() == target.size() && !pred.empty(), "rms_accuracy: shape mismatch",
          ErrorCode::shape_mismatch);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(target[i]) - pred[i];
    s += d * d;
  }
  return 1.0 - std::sqrt(s / static_cast<double>(pred.size()));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Shape3 shape_of(GridDims d) {
  return {static_cast<int>(d.nx), static_cast<int>(d.ny), static_cast<int>(d.nz)};
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

double binary_accuracy(std::span<const double> pred, std::span<const double> target, double threshold) {
  return binary_impl(pred, target, threshold);
}
double binary_accuracy(std::span<const double> pred, std::span<const float> target, double threshold) {
  return binary_impl(pred, target, threshold);
}
double rms_accuracy(std::span<const double> pred, std::span<const double> target) {
  return rms_impl(pred, target);
}
double rms_accuracy(std::span<const double> pred, std::span<const float> target) {
  return rms_impl(pred, target);
}

MetricReport evaluate(Network& network, const NetworkParameters& params,
                      std::span<const SampleRecord> records, double threshold) {
  require(!records.empty(), "evaluate: no records");
  MetricReport r;
  r.threshold = threshold;
  for (const auto& rec : records) {
    const auto input = select_channels(rec.input, network.config().channels);
    const auto pred = network.forward(params, input);
    r.binary_accuracy += binary_accuracy(pred, std::span<const float>(rec.target), threshold);
    r.rms_accuracy += rms_accuracy(pred, std::span<const float>(rec.target));
  }
  r.samples = records.size();
  r.binary_accuracy /= static_cast<double>(records.size());
  r.rms_accuracy /= static_cast<double>(records.size());
  return r;
}

std::vector<int> channels_for(unsigned groups) {
  require(groups != 0 && groups < 8, "channel groups: need a non-empty subset of density, gradient, boundary");
  std::vector<int> out;
  if (groups & kGroupDensity) out.push_back(kDensity);
  if (groups & kGroupGradient) out.push_back(kDensityGradient);
  if (groups & kGroupBoundary)
    for (int c = kForceX; c <= kConstraintZ; ++c) out.push_back(c);
  return out;
}

unsigned parse_channel_groups(const std::string& csv) {
  unsigned groups = 0;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "density") groups |= kGroupDensity;
    else if (item == "gradient") groups |= kGroupGradient;
    else if (item == "boundary") groups |= kGroupBoundary;
    else fail(ErrorCode::invalid_argument, "unknown channel group '" + item + "'");
  }
  require(groups != 0, "channel groups: empty subset");
  return groups;
}

std::string channel_groups_name(unsigned groups) {
  std::string out;
  auto add = [&](const char* s) { out += out.empty() ? s : std::string("+") + s; };
  if (groups & kGroupDensity) add("density");
  if (groups & kGroupGradient) add("gradient");
  if (groups & kGroupBoundary) add("boundary");
  return out;
}

std::vector<unsigned> all_channel_subsets() {
  return {kGroupDensity,
          kGroupGradient,
          kGroupBoundary,
          kGroupDensity | kGroupGradient,
          kGroupDensity | kGroupBoundary,
          kGroupGradient | kGroupBoundary,
          kGroupDensity | kGroupGradient | kGroupBoundary};
}

NetworkConfig with_channels(const NetworkConfig& config, std::vector<int> channels) {
  require(!config.layers.empty(), "with_channels: empty network");
  NetworkConfig out = config;
  out.layers.front().in_channels = static_cast<int>(channels.size());
  out.channels = std::move(channels);
  return out;
}

std::string reports_to_csv(std::span<const LabeledReport> rows) {
  std::string out = "label,binary_accuracy,rms_accuracy,samples,threshold\n";
  for (const auto& r : rows) {
    require(r.label.find_first_of(",\n") == std::string::npos, "report label contains a separator");
    out += r.label + "," + fmt(r.report.binary_accuracy) + "," + fmt(r.report.rms_accuracy) + "," +
           std::to_string(r.report.samples) + "," + fmt(r.report.threshold) + "\n";
  }
  return out;
}

std::vector<LabeledReport> reports_from_csv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  require(std::getline(in, line) && line == "label,binary_accuracy,rms_accuracy,samples,threshold",
          "report csv: bad header");
  std::vector<LabeledReport> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string label, b, r, n, t;
    require(std::getline(ls, label, ',') && std::getline(ls, b, ',') && std::getline(ls, r, ',') &&
                std::getline(ls, n, ',') && std::getline(ls, t),
            "report csv: malformed row");
    rows.push_back({label, {std::stod(b), std::stod(r), std::stoull(n), std::stod(t)}});
  }
  return rows;
}

std::vector<LabeledReport> ablation_study(std::span<const SampleRecord> train_records,
                                          std::span<const SampleRecord> test_records,
                                          std::span<const unsigned> subsets,
                                          const NetworkConfig& net, const TrainConfig& config,
                                          const AblationOptions& options) {
  require(!train_records.empty() && !test_records.empty(), "ablation: empty train or test set");
  std::vector<SampleRecord> augmented;
  if (options.augment) {
    Rng rng(options.augment_seed);
    augmented = augment_dataset(train_records, options.augment_fraction, rng);
    train_records = augmented;
  }
  std::vector<LabeledReport> rows;
  for (unsigned groups : subsets) {
    const auto cfg = with_channels(net, channels_for(groups));
    const auto trained = train(train_records, cfg, config);
    Network network(cfg, shape_of(test_records.front().input.dims), config.epsilon);
    rows.push_back({channel_groups_name(groups),
                    evaluate(network, trained.params, test_records, options.threshold)});
  }
  return rows;
}

IterationGrid iteration_grid(std::span<const IterationTrace> traces, Network& network,
                             const NetworkParameters& params, std::span<const std::size_t> m_list,
                             std::span<const std::size_t> n_list, double threshold) {
  require(!traces.empty() && !m_list.empty() && !n_list.empty(), "iteration_grid: empty input");
  std::size_t deepest = 0;
  for (auto v : m_list) deepest = std::max(deepest, v);
  for (auto v : n_list) deepest = std::max(deepest, v);
  for (const auto& t : traces)
    require(t.final_iteration() >= deepest, "iteration_grid: trace of seed " +
                                                std::to_string(t.problem.seed) +
                                                " is shorter than the largest grid iteration");

  IterationGrid grid;
  grid.m_list.assign(m_list.begin(), m_list.end());
  grid.n_list.assign(n_list.begin(), n_list.end());
  grid.binary.assign(m_list.size() * n_list.size(), std::nullopt);
  grid.rms.assign(m_list.size() * n_list.size(), std::nullopt);

  std::vector<std::vector<float>> boundaries;
  for (const auto& t : traces) boundaries.push_back(problem_boundary(t.problem));

  for (std::size_t i = 0; i < m_list.size(); ++i)
    for (std::size_t j = 0; j < n_list.size(); ++j) {
      if (m_list[i] == n_list[j]) continue;
      double b = 0.0, r = 0.0;
      for (std::size_t k = 0; k < traces.size(); ++k) {
        const auto& t = traces[k];
        const auto input = encode_fields(t.problem.domain, t.entries[m_list[i]].density,
                                         t.entries[n_list[j]].density, boundaries[k]);
        const auto pred = network.forward(params, select_channels(input, network.config().channels));
        b += binary_accuracy(pred, std::span<const double>(t.final_density()), threshold);
        r += rms_accuracy(pred, std::span<const double>(t.final_density()));
      }
      grid.binary[i * n_list.size() + j] = b / static_cast<double>(traces.size());
      grid.rms[i * n_list.size() + j] = r / static_cast<double>(traces.size());
    }
  return grid;
}

std::string grid_to_csv(const IterationGrid& grid, bool rms) {
  std::string out = "m\\n";
  for (auto n : grid.n_list) out += "," + std::to_string(n);
  out += "\n";
  for (std::size_t i = 0; i < grid.m_list.size(); ++i) {
    out += std::to_string(grid.m_list[i]);
    for (std::size_t j = 0; j < grid.n_list.size(); ++j) {
      const auto v = rms ? grid.rms_at(i, j) : grid.binary_at(i, j);
      out += "," + (v ? fmt(*v) : std::string("-"));
    }
    out += "\n";
  }
  return out;
}

std::vector<std::size_t> grid_inversions(const IterationGrid& grid) {
  // Rows in ascending m; absent cells are skipped, not treated as breaks.
  std::vector<std::size_t> order(grid.m_list.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return grid.m_list[a] < grid.m_list[b]; });
  std::vector<std::size_t> out(grid.n_list.size(), 0);
  for (std::size_t j = 0; j < grid.n_list.size(); ++j) {
    std::optional<double> prev;
    for (auto i : order) {
      const auto v = grid.binary_at(i, j);
      if (!v) continue;
      if (prev && *v < *prev) ++out[j];
      prev = v;
    }
  }
  return out;
}

std::vector<SampleRecord> fixed_pair_records(std::span<const IterationTrace> traces, std::size_t m,
                                             std::size_t n) {
  std::vector<SampleRecord> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(make_record(t, m, n));
  return out;
}

std::vector<SampleRecord> strategy_records(std::span<const IterationTrace> traces,
                                           PairStrategy strategy, std::size_t pairs_per_trace,
                                           std::uint64_t seed) {
  require(pairs_per_trace >= 1, "strategy_records: need at least one pair per trace");
  Rng rng(seed);
  std::vector<SampleRecord> out;
  out.reserve(traces.size() * pairs_per_trace);
  for (const auto& t : traces)
    for (std::size_t k = 0; k < pairs_per_trace; ++k) {
      const auto pair = sample_iteration_pair(strategy, t.final_iteration(), rng);
      out.push_back(make_record(t, pair.m, pair.n));
    }
  return out;
}

std::vector<LabeledReport> strategy_comparison(std::span<const IterationTrace> train_traces,
                                               std::span<const SampleRecord> test_records,
                                               std::span<const PairStrategy> strategies,
                                               std::size_t pairs_per_trace,
                                               const NetworkConfig& net, const TrainConfig& config,
                                               std::uint64_t seed, double threshold) {
  require(!test_records.empty(), "strategy_comparison: empty test set");
  std::vector<LabeledReport> rows;
  for (auto s : strategies) {
    const auto records = strategy_records(train_traces, s, pairs_per_trace, seed);
    const auto trained = train(records, net, config);
    Network network(net, shape_of(test_records.front().input.dims), config.epsilon);
    rows.push_back({strategy_name(s), evaluate(network, trained.params, test_records, threshold)});
  }
  return rows;
}

HybridResult hybrid_run(const ProblemSpec& problem, const SimpConfig& simp, Network& network,
                        const NetworkParameters& params, const HybridOptions& options) {
  require(options.gap >= 1, "hybrid: gap must be >= 1");
  const FilterKernel kernel(problem.domain, simp.r_min_factor * problem.domain.h);
  CutoffMonitor monitor(kernel, options.tau);
  double elapsed = 0.0, at_cutoff = 0.0;
  auto observer = [&](const TraceEntry& e) {
    elapsed += e.wall_ms;
    if (!monitor.fired() && monitor.observe(e.iteration, e.density)) at_cutoff = elapsed;
    return true;
  };
  const auto trace = run_simp(problem, simp, observer);

  HybridResult r;
  r.seed = problem.seed;
  r.final_iteration = trace.final_iteration();
  r.full_ms = elapsed;
  r.ground_truth = trace.final_density();
  r.metrics.threshold = options.threshold;
  r.metrics.samples = 1;
  if (!monitor.fired()) {
    r.fallback = true;
    r.cutoff = r.final_iteration;
    r.cutoff_ms = elapsed;
    r.prediction.density = r.ground_truth;
    r.prediction.binary.resize(r.ground_truth.size());
    for (std::size_t i = 0; i < r.ground_truth.size(); ++i)
      r.prediction.binary[i] = r.ground_truth[i] >= options.threshold ? 1 : 0;
    r.metrics.binary_accuracy = 1.0;
    r.metrics.rms_accuracy = 1.0;
    r.speedup = 0.0;
    return r;
  }
  r.cutoff = monitor.cutoff();
  r.cutoff_ms = at_cutoff;
  const std::size_t n = r.cutoff > options.gap ? r.cutoff - options.gap : 0;
  const auto start = std::chrono::steady_clock::now();
  const auto input = encode_channels(trace, r.cutoff, n);
  r.prediction = predict(network, params, input, options.threshold);
  r.inference_ms = elapsed_ms(start);
  r.metrics.binary_accuracy = binary_accuracy(r.prediction.density, r.ground_truth, options.threshold);
  r.metrics.rms_accuracy = rms_accuracy(r.prediction.density, r.ground_truth);
  r.speedup = 1.0 - (r.cutoff_ms + r.inference_ms) / r.full_ms;
  return r;
}

std::string hybrid_to_csv(std::span<const HybridResult> results) {
  std::string out = "seed,cutoff,fallback,final_iteration,binary_accuracy,rms_accuracy\n";
  for (const auto& r : results)
    out += std::to_string(r.seed) + "," + std::to_string(r.cutoff) + "," + (r.fallback ? "1" : "0") +
           "," + std::to_string(r.final_iteration) + "," + fmt(r.metrics.binary_accuracy) + "," +
           fmt(r.metrics.rms_accuracy) + "\n";
  return out;
}

std::string hybrid_timing_csv(std::span<const HybridResult> results) {
  std::string out = "seed,cutoff_ms,inference_ms,full_ms,speedup\n";
  for (const auto& r : results)
    out += std::to_string(r.seed) + "," + fmt(r.cutoff_ms) + "," + fmt(r.inference_ms) + "," +
           fmt(r.full_ms) + "," + fmt(r.speedup) + "\n";
  return out;
}

}  // namespace topo3d

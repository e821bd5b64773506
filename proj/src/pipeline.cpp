#include "topo3d/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "topo3d/dataset.hpp"
#include "topo3d/error.hpp"
#include "topo3d/eval.hpp"
#include "topo3d/io.hpp"
#include "topo3d/net.hpp"
#include "topo3d/process_map.hpp"
#include "topo3d/sampler.hpp"

namespace topo3d {

namespace fs = std::filesystem;

namespace {

// Stream ids for derive_seed.
enum : std::uint64_t {
  kProblemStream = 1,
  kPairStream = 2,
  kSplitStream = 3,
  kTrainStream = 4,
  kAugmentStream = 5,
  kHybridStream = 6,
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::invalid_config, path.string() + ": " + e.what());
  }
}

void write_provenance(const fs::path& out, const std::string& command, const RunConfig& config,
                      const CommandInputs& in) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = to_json(config);
  j["seeds"] = {{"run", config.seed}, {"train", derive_seed(config.seed, kTrainStream, 0)}};
  j["inputs"] = {{"input", in.input.generic_string()}, {"model", in.model.generic_string()}};
  if (in.m != 0) j["inputs"]["pair"] = {in.m, in.n};
  if (!in.strategies.empty()) j["inputs"]["strategies"] = in.strategies;
  j["versions"] = {{"topo3d", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"compiler", __VERSION__}};
  write_json(out / "provenance.json", j);
}

Shape3 grid_of(const DesignDomain& d) { return {d.nx, d.ny, d.nz}; }

std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

TrainConfig train_config(const RunConfig& c) {
  auto t = c.train;
  t.seed = derive_seed(c.seed, kTrainStream, 0);
  return t;
}

ProblemSpec problem_for(const RunConfig& c, const CommandInputs& in) {
  if (in.input.empty()) return sample_problem(c.seed, c.domain, c.sampler);
  auto p = load_problem(in.input);
  validate_problem(p);
  return p;
}

std::string compliance_csv(const IterationTrace& trace, bool timing) {
  std::string out = timing ? "iteration,compliance,max_change,wall_ms\n" : "iteration,compliance,max_change\n";
  for (const auto& e : trace.entries) {
    out += std::to_string(e.iteration) + "," + fmt(e.compliance) + "," + fmt(e.max_change);
    if (timing) out += "," + fmt(e.wall_ms);
    out += "\n";
  }
  return out;
}

// Solves in parallel; result order follows `problems`, independent of thread count.
std::vector<IterationTrace> solve_all(const std::vector<ProblemSpec>& problems,
                                      const SimpConfig& simp, int threads) {
  std::vector<IterationTrace> traces(problems.size());
  std::vector<std::exception_ptr> errors(problems.size());
  std::size_t next = 0;
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> g(lock);
        if (next >= problems.size()) return;
        i = next++;
      }
      try {
        traces[i] = run_simp(problems[i], simp);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, threads));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n, problems.size()); ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return traces;
}

fs::path trace_dir(const fs::path& dataset, std::uint64_t seed) {
  return dataset / "traces" / std::to_string(seed);
}

struct Dataset {
  DatasetManifest manifest;
  std::vector<SampleRecord> train, validation, test;
};

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.manifest = manifest_from_json(read_json(dir / "manifest.json"));
  d.train = read_records(dir / "train.ds");
  d.validation = read_records(dir / "validation.ds");
  d.test = read_records(dir / "test.ds");
  return d;
}

std::vector<IterationTrace> load_split_traces(const fs::path& dir, const DatasetManifest& m,
                                              Split split) {
  std::vector<IterationTrace> out;
  for (auto i : m.indices(split)) out.push_back(load_trace(trace_dir(dir, m.seeds[i])));
  return out;
}

Checkpoint load_model(const CommandInputs& in) {
  require(!in.model.empty(), "this command needs --model");
  return load_checkpoint(in.model);
}

std::size_t pair_m(const RunConfig& c, const CommandInputs& in) { return in.m ? in.m : c.eval.test_m; }
std::size_t pair_n(const RunConfig& c, const CommandInputs& in) { return in.m ? in.n : c.eval.test_n; }

// ---- commands ----

void cmd_sample(const RunConfig& c, const fs::path& out, const CommandInputs&) {
  const auto p = sample_problem(c.seed, c.domain, c.sampler);
  save_problem(out / "problem.json", p);
  std::vector<double> forces_mag(p.domain.element_count(), 0.0);
  const auto boundary = problem_boundary(p);
  const auto nv = p.domain.element_count();
  for (std::size_t e = 0; e < nv; ++e)
    for (int a = 0; a < 3; ++a) forces_mag[e] += std::abs(boundary[a * nv + e]);
  write_file(out / "loads.vtk", to_vtk(p.domain, forces_mag, "load_magnitude"));
}

void cmd_solve(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  const auto problem = problem_for(c, in);
  const auto trace = run_simp(problem, c.simp);
  save_problem(out / "problem.json", problem);
  save_trace(out / "trace", trace);
  write_file(out / "compliance.csv", compliance_csv(trace, in.timing));
  write_file(out / "final.vtk", to_vtk(problem.domain, trace.final_density(), "density"));
}

void cmd_map_process(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  require(!in.input.empty(), "map-process needs --input (a trace directory)");
  const fs::path dir = fs::exists(in.input / "trace" / "trace.json") ? in.input / "trace" : in.input;
  const auto trace = load_trace(dir);
  const FilterKernel kernel(trace.problem.domain, c.simp.r_min_factor * trace.problem.domain.h);
  const auto acc = binary_accuracy_curve(trace, c.eval.threshold);
  const auto grad = gradient_norm_curve(trace);
  const auto spatial = spatial_gradient_norm_curve(trace, kernel);
  write_file(out / "binary_accuracy.csv", curve_to_csv(acc));
  write_file(out / "gradient_norm.csv", curve_to_csv(grad));
  write_file(out / "spatial_gradient_norm.csv", curve_to_csv(spatial));
  write_file(out / "spatial_gradient_norm_normalized.csv", curve_to_csv(normalized(spatial)));
  const auto cut = cutoff_iteration(trace, kernel, c.eval.tau);
  const auto T = trace.final_iteration();
  write_json(out / "cutoff.json", {{"tau", c.eval.tau},
                                   {"cutoff_iteration", cut.iteration},
                                   {"reached", cut.reached},
                                   {"final_iteration", T},
                                   {"fraction", T ? static_cast<double>(cut.iteration) / T : 0.0}});
}

void cmd_build_dataset(const RunConfig& c, const fs::path& out, const CommandInputs&) {
  const auto strategy = parse_strategy(c.dataset.strategy);
  std::vector<ProblemSpec> problems;
  for (std::size_t i = 0; i < c.dataset.problems; ++i)
    problems.push_back(sample_problem(problem_seed(c.seed, i), c.domain, c.sampler));
  const auto traces = solve_all(problems, c.simp, c.threads);

  // Splits are drawn over problems so that no problem feeds two splits.
  auto manifest = split_dataset(problems.size(), derive_seed(c.seed, kSplitStream, 0));
  manifest.strategy = c.dataset.strategy;
  for (const auto& p : problems) manifest.seeds.push_back(p.seed);

  Rng pairs(derive_seed(c.seed, kPairStream, 0));
  std::vector<SampleRecord> train_records, validation_records, test_records;
  std::string summary = "seed,bc_case,volume_fraction,final_iteration,converged,split\n";
  const char* split_names[] = {"train", "validation", "test"};
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    const auto split = manifest.assignment[i];
    save_trace(trace_dir(out, t.problem.seed), t);
    summary += std::to_string(t.problem.seed) + "," + std::to_string(t.problem.bc_case) + "," +
               fmt(t.problem.volume_fraction) + "," + std::to_string(t.final_iteration()) + "," +
               (t.converged ? "1" : "0") + "," + split_names[static_cast<int>(split)] + "\n";
    if (split == Split::test) {
      if (t.final_iteration() >= c.eval.test_m)
        test_records.push_back(make_record(t, c.eval.test_m, c.eval.test_n));
      continue;
    }
    auto& dst = split == Split::train ? train_records : validation_records;
    if (t.final_iteration() < 2) continue;
    for (std::size_t k = 0; k < c.dataset.pairs_per_problem; ++k) {
      const auto pair = sample_iteration_pair(strategy, t.final_iteration(), pairs);
      dst.push_back(make_record(t, pair.m, pair.n));
    }
  }
  if (c.dataset.augment) {
    Rng rng(derive_seed(c.seed, kAugmentStream, 0));
    train_records = augment_dataset(train_records, c.dataset.augment_fraction, rng);
  }
  write_records(out / "train.ds", train_records);
  write_records(out / "validation.ds", validation_records);
  write_records(out / "test.ds", test_records);
  write_json(out / "manifest.json", to_json(manifest));
  write_file(out / "problems.csv", summary);
}

void cmd_train(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  require(!in.input.empty(), "train needs --input (a dataset directory)");
  const auto data = load_dataset(in.input);
  const auto tc = train_config(c);
  const auto result = train(data.train, c.network, tc);
  save_checkpoint(out / "checkpoint.bin", {c.network, grid_of(c.domain), result.params});
  write_file(out / "telemetry_steps.csv", telemetry_steps_csv(result.telemetry));
  write_file(out / "telemetry_epochs.csv", telemetry_epochs_csv(result.telemetry));
  // Scores use the parameters as stored, so they match a reload of the checkpoint.
  const auto stored = load_checkpoint(out / "checkpoint.bin");
  Network network(c.network, grid_of(c.domain), tc.epsilon);
  std::vector<LabeledReport> rows;
  rows.push_back({"train", evaluate(network, stored.params, data.train, c.eval.threshold)});
  if (!data.validation.empty())
    rows.push_back({"validation", evaluate(network, stored.params, data.validation, c.eval.threshold)});
  write_file(out / "metrics.csv", reports_to_csv(rows));
}

void dump_predictions(const fs::path& path, GridDims dims, const std::vector<Prediction>& preds,
                      const std::vector<std::vector<double>>& truths, double threshold) {
  FieldSet set;
  set.dims = dims;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<float> binary(preds[i].binary.begin(), preds[i].binary.end());
    std::vector<float> truth(truths[i].begin(), truths[i].end());
    std::vector<float> truth_binary(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) truth_binary[k] = truths[i][k] >= threshold ? 1.0f : 0.0f;
    set.fields.emplace_back(preds[i].density.begin(), preds[i].density.end());
    set.fields.push_back(std::move(binary));
    set.fields.push_back(std::move(truth));
    set.fields.push_back(std::move(truth_binary));
  }
  write_fields(path, set);
}

void cmd_predict(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  require(!in.input.empty(), "predict needs --input (a trace directory)");
  const auto model = load_model(in);
  const fs::path dir = fs::exists(in.input / "trace" / "trace.json") ? in.input / "trace" : in.input;
  const auto trace = load_trace(dir);
  require(grid_of(trace.problem.domain) == model.grid, "predict: model grid differs from the trace grid",
          ErrorCode::shape_mismatch);
  const auto m = pair_m(c, in), n = pair_n(c, in);
  require(m <= trace.final_iteration(), "predict: m exceeds the trace length");
  Network network(model.config, model.grid, c.train.epsilon);
  const auto pred = predict(network, model.params, encode_channels(trace, m, n), c.eval.threshold);
  const auto& truth = trace.final_density();
  dump_predictions(out / "prediction.fld", dims_of(trace.problem.domain), {pred}, {truth},
                   c.eval.threshold);
  write_file(out / "prediction.vtk", to_vtk(trace.problem.domain, pred.density, "density"));
  std::vector<double> binary(pred.binary.begin(), pred.binary.end());
  write_file(out / "prediction_binary.vtk", to_vtk(trace.problem.domain, binary, "solid"));
  const MetricReport r{binary_accuracy(pred.density, truth, c.eval.threshold),
                       rms_accuracy(pred.density, truth), 1, c.eval.threshold};
  const LabeledReport row{"m" + std::to_string(m) + "_n" + std::to_string(n), r};
  write_file(out / "metrics.csv", reports_to_csv(std::span(&row, 1)));
}

void cmd_evaluate(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  require(!in.input.empty(), "evaluate needs --input (a dataset directory)");
  const auto model = load_model(in);
  const auto data = load_dataset(in.input);
  require(!data.test.empty(), "evaluate: the dataset has no test records");
  Network network(model.config, model.grid, c.train.epsilon);
  std::vector<LabeledReport> rows{{"test", evaluate(network, model.params, data.test, c.eval.threshold)}};
  if (!data.validation.empty())
    rows.push_back({"validation", evaluate(network, model.params, data.validation, c.eval.threshold)});
  write_file(out / "metrics.csv", reports_to_csv(rows));

  std::string per = "seed,m,n,binary_accuracy,rms_accuracy\n";
  std::vector<Prediction> preds;
  std::vector<std::vector<double>> truths;
  for (const auto& rec : data.test) {
    auto p = predict(network, model.params, rec.input, c.eval.threshold);
    const auto truth = widen(rec.target);
    per += std::to_string(rec.seed) + "," + std::to_string(rec.m) + "," + std::to_string(rec.n) + "," +
           fmt(binary_accuracy(p.density, truth, c.eval.threshold)) + "," +
           fmt(rms_accuracy(p.density, truth)) + "\n";
    preds.push_back(std::move(p));
    truths.push_back(truth);
  }
  write_file(out / "per_sample.csv", per);
  dump_predictions(out / "predictions.fld", data.test.front().input.dims, preds, truths,
                   c.eval.threshold);
}

void cmd_ablate(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  require(!in.input.empty(), "ablate needs --input (a dataset directory)");
  const auto data = load_dataset(in.input);
  require(!data.test.empty(), "ablate: the dataset has no test records");
  const auto tc = train_config(c);
  if (!in.strategies.empty()) {
    std::vector<PairStrategy> strategies;
    for (const auto& s : in.strategies) strategies.push_back(parse_strategy(s));
    const auto traces = load_split_traces(in.input, data.manifest, Split::train);
    const auto rows = strategy_comparison(traces, data.test, strategies, c.dataset.pairs_per_problem,
                                          c.network, tc, derive_seed(c.seed, kPairStream, 1),
                                          c.eval.threshold);
    write_file(out / "strategies.csv", reports_to_csv(rows));
    return;
  }
  const auto subsets = all_channel_subsets();
  AblationOptions opts;
  opts.threshold = c.eval.threshold;
  write_file(out / "ablation.csv",
             reports_to_csv(ablation_study(data.train, data.test, subsets, c.network, tc, opts)));
  if (c.dataset.augment) {
    // With and without rotations, for the configured channel set only.
    const std::vector<unsigned> one{c.channel_groups};
    auto plain = ablation_study(data.train, data.test, one, c.network, tc, opts);
    opts.augment = true;
    opts.augment_fraction = c.dataset.augment_fraction;
    opts.augment_seed = derive_seed(c.seed, kAugmentStream, 1);
    auto rotated = ablation_study(data.train, data.test, one, c.network, tc, opts);
    plain.front().label = "original";
    rotated.front().label = "augmented";
    plain.push_back(rotated.front());
    write_file(out / "augmentation.csv", reports_to_csv(plain));
  }
}

void cmd_grid(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  require(!in.input.empty(), "grid needs --input (a dataset directory)");
  const auto model = load_model(in);
  const auto manifest = manifest_from_json(read_json(in.input / "manifest.json"));
  const auto traces = load_split_traces(in.input, manifest, Split::test);
  std::size_t deepest = 0;
  for (auto v : c.eval.grid_m) deepest = std::max(deepest, v);
  for (auto v : c.eval.grid_n) deepest = std::max(deepest, v);
  std::vector<IterationTrace> usable;
  for (const auto& t : traces)
    if (t.final_iteration() >= deepest) usable.push_back(t);
  require(!usable.empty(), "grid: no test trace is long enough for the grid");
  Network network(model.config, model.grid, c.train.epsilon);
  const auto grid = iteration_grid(usable, network, model.params, c.eval.grid_m, c.eval.grid_n,
                                   c.eval.threshold);
  write_file(out / "grid_binary.csv", grid_to_csv(grid, false));
  write_file(out / "grid_rms.csv", grid_to_csv(grid, true));
}

void cmd_hybrid(const RunConfig& c, const fs::path& out, const CommandInputs& in) {
  const auto model = load_model(in);
  require(model.grid == grid_of(c.domain), "hybrid: model grid differs from the configured domain",
          ErrorCode::shape_mismatch);
  Network network(model.config, model.grid, c.train.epsilon);
  HybridOptions opts{c.eval.tau, c.eval.gap, c.eval.threshold};
  std::vector<HybridResult> results;
  FieldSet fields;
  fields.dims = dims_of(c.domain);
  for (std::size_t i = 0; i < c.eval.hybrid_problems; ++i) {
    const auto p = sample_problem(hybrid_seed(c.seed, i), c.domain, c.sampler);
    results.push_back(hybrid_run(p, c.simp, network, model.params, opts));
    const auto& r = results.back();
    fields.fields.emplace_back(r.prediction.density.begin(), r.prediction.density.end());
    fields.fields.emplace_back(r.ground_truth.begin(), r.ground_truth.end());
  }
  write_file(out / "hybrid.csv", hybrid_to_csv(results));
  write_file(out / "hybrid_timing.csv", hybrid_timing_csv(results));
  write_fields(out / "hybrid_fields.fld", fields);
}

}  // namespace

std::uint64_t problem_seed(std::uint64_t run_seed, std::size_t index) {
  return derive_seed(run_seed, kProblemStream, index);
}

std::uint64_t hybrid_seed(std::uint64_t run_seed, std::size_t index) {
  return derive_seed(run_seed, kHybridStream, index);
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"sample", "solve",    "map-process", "build-dataset",
                                              "train",  "predict",  "evaluate",    "ablate",
                                              "grid",   "hybrid"};
  return names;
}

bool is_command(const std::string& name) {
  const auto& n = command_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

void run_command(const std::string& command, const RunConfig& config, const fs::path& out,
                 const CommandInputs& inputs) {
  require(is_command(command), "unknown command '" + command + "'");
  validate_config(config);
  require(!out.empty(), "an output directory is required");
  fs::create_directories(out);
  write_provenance(out, command, config, inputs);
  if (command == "sample") cmd_sample(config, out, inputs);
  else if (command == "solve") cmd_solve(config, out, inputs);
  else if (command == "map-process") cmd_map_process(config, out, inputs);
  else if (command == "build-dataset") cmd_build_dataset(config, out, inputs);
  else if (command == "train") cmd_train(config, out, inputs);
  else if (command == "predict") cmd_predict(config, out, inputs);
  else if (command == "evaluate") cmd_evaluate(config, out, inputs);
  else if (command == "ablate") cmd_ablate(config, out, inputs);
  else if (command == "grid") cmd_grid(config, out, inputs);
  else cmd_hybrid(config, out, inputs);
}

void save_trace(const fs::path& dir, const IterationTrace& trace) {
  FieldSet set;
  set.dims = dims_of(trace.problem.domain);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : trace.entries) {
    set.fields.emplace_back(e.density.begin(), e.density.end());
    entries.push_back({{"iteration", e.iteration},
                       {"compliance", e.compliance},
                       {"max_change", e.max_change},
                       {"pcg_iterations", e.pcg_iterations}});
  }
  write_fields(dir / "densities.fld", set);
  write_json(dir / "trace.json", {{"problem", to_json(trace.problem)},
                                  {"converged", trace.converged},
                                  {"final_iteration", trace.final_iteration()},
                                  {"entries", entries}});
}

IterationTrace load_trace(const fs::path& dir) {
  const auto j = read_json(dir / "trace.json");
  check_keys(j, {"problem", "converged", "final_iteration", "entries"}, "trace");
  IterationTrace t;
  const auto set = read_fields(dir / "densities.fld");
  try {
    t.problem = problem_from_json(j.at("problem"));
    t.converged = j.at("converged").get<bool>();
    const auto& entries = j.at("entries");
    require(entries.size() == set.fields.size() && !entries.empty(),
            "trace: entry count differs from the stored fields", ErrorCode::shape_mismatch);
    require(set.dims == dims_of(t.problem.domain), "trace: field grid differs from the problem",
            ErrorCode::shape_mismatch);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& ej = entries[i];
      TraceEntry e;
      e.iteration = ej.at("iteration").get<std::size_t>();
      e.compliance = ej.at("compliance").get<double>();
      e.max_change = ej.at("max_change").get<double>();
      e.pcg_iterations = ej.at("pcg_iterations").get<std::size_t>();
      e.density = widen(set.fields[i]);
      t.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, dir.string() + "/trace.json: " + e.what());
  }
  return t;
}

}  // namespace topo3d

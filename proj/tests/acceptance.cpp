// Acceptance suite: one PASS/FAIL line per criterion, measured values alongside.
// Usage: acceptance <small config json> [artifact dir]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "topo3d/config.hpp"
#include "topo3d/eval.hpp"
#include "topo3d/fea.hpp"
#include "topo3d/pipeline.hpp"
#include "topo3d/process_map.hpp"
#include "topo3d/rng.hpp"
#include "topo3d/sampler.hpp"

using namespace topo3d;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Verdict> verdicts;
fs::path artifacts;

void report(int id, std::string name, bool pass, std::string detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  verdicts.push_back({id, std::move(name), pass, std::move(detail)});
}

// Runs a criterion body; an exception is a failure, not a crash.
void guarded(int id, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void log(const std::string& s) {
  std::fprintf(stderr, "  .. %s\n", s.c_str());
}

// ---- 1: PCG vs dense direct solve ----------------------------------------

void fea_oracle() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(101, 1, 0));
  double worst = 0;
  for (int c = 0; c < 20; ++c) {
    const int nx = static_cast<int>(rng.uniform_int(1, 3));
    const int ny = static_cast<int>(rng.uniform_int(1, 3));
    const int nz = static_cast<int>(rng.uniform_int(1, 3));
    const auto d = build_domain(nx, ny, nz, nx, ny, nz);
    ProblemSpec p;
    p.domain = d;
    p.loads = sample_loads(rng, d);
    p.bc_case = 1;
    std::vector<double> x(d.element_count());
    for (auto& v : x) v = rng.uniform(0.05, 1.0);
    const auto dofs = fixed_dofs_for_case(1, d);
    const auto f = assemble_forces(p);
    StiffnessOperator K(d, MaterialModel{});
    K.set_densities(x);
    const auto u = solve_equilibrium(K, f, dofs, SolveOptions{1e-13});
    const auto ref = oracle::dense_solve(oracle::dense_stiffness(d, x), f,
                                         {dofs.fixed_mask.begin(), dofs.fixed_mask.end()});
    double num = 0, den = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double r = ref(static_cast<Eigen::Index>(i));
      num += (u[i] - r) * (u[i] - r);
      den += r * r;
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  const double s = seconds_since(t0);
  report(1, "FEA oracle equivalence", worst <= 1e-8 && s < 10.0,
         fmt("20 grids <= 3x3x3, worst relative L2 %.2e (<= 1e-8), %.2f s (< 10 s)", worst, s));
}

// ---- 2: compliance sensitivity vs central differences --------------------

void sensitivity_fd() {
  const auto d = build_domain(2, 2, 2, 2, 2, 2);
  Rng rng(derive_seed(102, 1, 0));
  ProblemSpec p;
  p.domain = d;
  p.loads = sample_loads(rng, d);
  const auto dofs = fixed_dofs_for_case(1, d);
  const auto f = assemble_forces(p);
  std::vector<double> x(d.element_count());
  for (auto& v : x) v = rng.uniform(0.3, 0.9);
  auto evaluate_at = [&](const std::vector<double>& xs) {
    StiffnessOperator K(d, MaterialModel{});
    K.set_densities(xs);
    const auto u = solve_equilibrium(K, f, dofs, SolveOptions{1e-13});
    return compliance_and_sensitivity(K, u, xs);
  };
  const auto base = evaluate_at(x);
  const double step = 1e-5;
  double worst = 0;
  for (std::size_t e = 0; e < x.size(); ++e) {
    auto xp = x, xm = x;
    xp[e] += step;
    xm[e] -= step;
    const double fd = (evaluate_at(xp).compliance - evaluate_at(xm).compliance) / (2 * step);
    worst = std::max(worst, std::abs(base.sensitivity[e] - fd) / std::abs(fd));
  }
  report(2, "Sensitivity correctness", worst < 1e-4,
         fmt("2x2x2, worst per-element relative error %.2e (< 1e-4)", worst));
}

// ---- 5: metric hand cases --------------------------------------------------

void metric_cases() {
  const std::vector<double> pred{0.6, 0.4, 0.7, 0.2}, target{1, 0, 0, 0};
  const std::vector<double> half(4, 0.5), ones(4, 1.0), zeros(4, 0.0), tie{0.5, 0.5, 0.5, 0.5};
  const double b1 = binary_accuracy(pred, target);
  const double r1 = rms_accuracy(half, ones);
  const double r2 = rms_accuracy(target, target);
  const double r3 = rms_accuracy(zeros, ones);
  const double b2 = binary_accuracy(tie, ones);
  // sqrt(mean of 0.16, 0.16, 0.49, 0.04) by hand.
  const double r4 = rms_accuracy(pred, target);
  const double r4_hand = 1.0 - std::sqrt((0.16 + 0.16 + 0.49 + 0.04) / 4.0);
  const bool ok = b1 == 0.75 && r1 == 0.5 && r2 == 1.0 && r3 == 0.0 && b2 == 1.0 &&
                  std::abs(r4 - r4_hand) < 1e-15;
  report(5, "Metric formulas", ok,
         fmt("binary %.2f (0.75), rms %.2f (0.5), self %.1f, opposite %.1f, tie %.1f, rms mixed %.6f (%.6f)",
             b1, r1, r2, r3, b2, r4, r4_hand));
}

// ---- 6: network gradient check on the reduced config ----------------------

double gradient_check(const NetworkConfig& cfg, Shape3 grid, std::uint64_t seed, double beta) {
  Rng rng(seed);
  auto params = init_parameters(cfg, seed);
  for (auto& l : params.layers)
    for (auto& b : l.bias) b = rng.uniform(-0.1, 0.1);
  std::vector<double> input(cfg.channels.size() * grid.size());
  for (auto& v : input) v = rng.uniform(-1, 1);
  std::vector<float> target(grid.size());
  for (auto& v : target) v = static_cast<float>(rng.uniform01());
  Network net(cfg, grid);
  auto f = [&](const NetworkParameters& p) { return loss(net.forward(p, input), target, beta); };
  const auto y = net.forward(params, input);
  auto grads = zero_parameters(cfg);
  net.backward(params, loss_gradient(y, target, beta), grads);
  const double h = 1e-6;
  double worst = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    for (int which = 0; which < 2; ++which) {
      auto& tensor = which == 0 ? params.layers[l].weights : params.layers[l].bias;
      const auto& analytic = which == 0 ? grads.layers[l].weights : grads.layers[l].bias;
      double diff = 0, na = 0, nf = 0;
      for (std::size_t i = 0; i < tensor.size(); ++i) {
        const double keep = tensor[i];
        tensor[i] = keep + h;
        const double up = f(params);
        tensor[i] = keep - h;
        const double down = f(params);
        tensor[i] = keep;
        const double fd = (up - down) / (2 * h);
        diff += (fd - analytic[i]) * (fd - analytic[i]);
        na += analytic[i] * analytic[i];
        nf += fd * fd;
      }
      const double denom = std::max(std::sqrt(na), std::sqrt(nf));
      if (denom > 0) worst = std::max(worst, std::sqrt(diff) / denom);
    }
  return worst;
}

void network_gradients() {
  const auto t0 = Clock::now();
  NetworkConfig c;
  c.channels = {0, 1};
  c.layers = {{LayerKind::conv3d, 3, 1, 1, 2, 3, Activation::relu},
              {LayerKind::conv3d, 3, 1, 1, 3, 1, Activation::tanh}};
  double worst = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) worst = std::max(worst, gradient_check(c, {6, 4, 4}, seed, 1.0));
  const double s = seconds_since(t0);
  report(6, "Network gradient check", worst < 1e-4 && s < 60.0,
         fmt("2 layers, 2 channels, 6x4x4, worst tensor relative error %.2e (< 1e-4), %.2f s", worst, s));
}

// ---- 13: determinism of every command -------------------------------------

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string without_threads(std::string s) {
  const std::string key = "\"threads\": ";
  for (auto at = s.find(key); at != std::string::npos; at = s.find(key, at + 1)) {
    auto end = at + key.size();
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    s.replace(at + key.size(), end - at - key.size(), "N");
  }
  return s;
}

void run_all_commands(const RunConfig& base, const fs::path& dir, int threads) {
  const auto keep = fs::current_path();
  fs::create_directories(dir);
  fs::current_path(dir);
  try {
    RunConfig cfg = base;
    CommandInputs in;
    run_command("sample", cfg, "sample");
    in.input = "sample/problem.json";
    run_command("solve", cfg, "solve", in);
    in.input = "solve/trace";
    run_command("map-process", cfg, "map", in);
    RunConfig threaded = cfg;
    threaded.threads = threads;
    run_command("build-dataset", threaded, "data");
    in = {};
    in.input = "data";
    run_command("train", cfg, "model", in);
    in.model = "model/checkpoint.bin";
    run_command("evaluate", cfg, "evaluate", in);
    run_command("grid", cfg, "grid", in);
    CommandInputs pr;
    pr.input = "solve/trace";
    pr.model = "model/checkpoint.bin";
    pr.m = 6;
    pr.n = 3;
    run_command("predict", cfg, "predict", pr);
    CommandInputs ab;
    ab.input = "data";
    run_command("ablate", cfg, "ablate", ab);
    ab.strategies = {"poisson5", "poisson30"};
    run_command("ablate", cfg, "strategies", ab);
    CommandInputs hy;
    hy.model = "model/checkpoint.bin";
    run_command("hybrid", cfg, "hybrid", hy);
  } catch (...) {
    fs::current_path(keep);
    throw;
  }
  fs::current_path(keep);
}

void determinism(const fs::path& small_config) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(small_config);
  const auto root = artifacts / "determinism";
  fs::remove_all(root);
  run_all_commands(cfg, root / "a", 1);
  run_all_commands(cfg, root / "b", 3);
  const auto fa = files_under(root / "a"), fb = files_under(root / "b");
  std::size_t compared = 0, differing = 0;
  std::string first_bad;
  for (const auto& rel : fa) {
    if (rel.filename().string().ends_with("_timing.csv")) continue;
    auto a = slurp(root / "a" / rel), b = slurp(root / "b" / rel);
    if (rel.filename() == "provenance.json") {
      a = without_threads(a);
      b = without_threads(b);
    }
    ++compared;
    if (a != b) {
      ++differing;
      if (first_bad.empty()) first_bad = rel.string();
    }
  }
  const bool ok = fa == fb && differing == 0 && compared >= 10;
  report(13, "Determinism", ok,
         fmt("10 commands x 2 runs (build-dataset threads 1 vs 3), %zu artifacts compared, %zu differ%s%s, %.1f s",
             compared, differing, first_bad.empty() ? "" : ", first ", first_bad.c_str(), seconds_since(t0)));
}

// ---- desk-scale corpus -----------------------------------------------------

constexpr std::uint64_t kRunSeed = 1;
constexpr std::size_t kTrainProblems = 125;
constexpr std::size_t kTestProblems = 100;
constexpr std::size_t kPairs = 4;

struct Corpus {
  std::vector<IterationTrace> train;
  std::vector<IterationTrace> test;
};

Corpus solve_corpus(const SimpConfig& simp) {
  Corpus c;
  const auto t0 = Clock::now();
  const auto& dom = reference_domain();
  // Test problems come first so criteria 3-4 see the first 20 of them early.
  for (std::size_t i = 0; c.test.size() < kTestProblems; ++i) {
    auto t = run_simp(sample_problem(problem_seed(kRunSeed, kTrainProblems + i), dom), simp);
    if (t.final_iteration() >= 20) c.test.push_back(std::move(t));
    if (c.test.size() % 10 == 0)
      log(fmt("test traces %zu/%zu, %.0f s", c.test.size(), kTestProblems, seconds_since(t0)));
  }
  for (std::size_t i = 0; i < kTrainProblems; ++i) {
    c.train.push_back(run_simp(sample_problem(problem_seed(kRunSeed, i), dom), simp));
    if ((i + 1) % 25 == 0) log(fmt("train traces %zu/%zu, %.0f s", i + 1, kTrainProblems, seconds_since(t0)));
  }
  return c;
}

// ---- 3 and 4: optimizer contract and process mapping ------------------------

void optimizer_and_mapping(std::span<const IterationTrace> traces, const SimpConfig& simp) {
  const auto& dom = reference_domain();
  const FilterKernel kernel(dom, simp.r_min_factor * dom.h);
  std::size_t bounds_bad = 0, volume_bad = 0, converged = 0, early_acc = 0, early_cut = 0;
  double worst_volume = 0;
  std::vector<std::size_t> Ts, cuts;
  std::vector<double> acc20;
  for (const auto& t : traces) {
    const double target = t.problem.volume_fraction * dom.volume();
    for (const auto& e : t.entries) {
      if (std::any_of(e.density.begin(), e.density.end(), [](double v) { return v < 0.0 || v > 1.0; }))
        ++bounds_bad;
      double vol = 0;
      for (double v : e.density) vol += v * dom.element_volume();
      const double err = std::abs(vol - target) / dom.volume();
      worst_volume = std::max(worst_volume, err);
      if (err > 1e-4) ++volume_bad;
    }
    const std::size_t T = t.final_iteration();
    Ts.push_back(T);
    if (t.converged && T <= 120) ++converged;
    const auto curve = binary_accuracy_curve(t);
    const auto at = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(T)));
    acc20.push_back(curve.values[at]);
    if (curve.values[at] >= 0.90) ++early_acc;
    const auto cut = cutoff_iteration(t, kernel, 0.05);
    cuts.push_back(cut.iteration);
    if (cut.reached && static_cast<double>(cut.iteration) <= 0.4 * static_cast<double>(T)) ++early_cut;
  }
  const std::size_t n = traces.size();
  auto list = [](const auto& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
    return s.str();
  };
  report(3, "Optimizer contract", bounds_bad == 0 && volume_bad == 0 && 5 * converged >= 4 * n,
         fmt("%zu problems, bound violations %zu, worst volume error %.1e V (<= 1e-4), converged <= 120: %zu/%zu; T = %s",
             n, bounds_bad, worst_volume, converged, n, list(Ts).c_str()));
  double acc_mean = std::accumulate(acc20.begin(), acc20.end(), 0.0) / static_cast<double>(n);
  report(4, "Process-mapping reproduction", 5 * early_acc >= 4 * n && 5 * early_cut >= 4 * n,
         fmt("accuracy >= 0.90 at 20%% progress: %zu/%zu (mean %.3f); cutoff within 40%%: %zu/%zu; cutoffs = %s",
             early_acc, n, acc_mean, early_cut, n, list(cuts).c_str()));
}

// ---- training helpers --------------------------------------------------------

struct Trained {
  NetworkConfig config;
  TrainResult result;
  double seconds = 0;
};

Trained train_on(std::span<const SampleRecord> records, std::vector<int> channels,
                 const TrainConfig& tc, const std::string& label) {
  const auto t0 = Clock::now();
  Trained t;
  t.config = with_channels(reference_network({0, 1}), std::move(channels));
  t.result = train(records, t.config, tc);
  t.seconds = seconds_since(t0);
  log(fmt("trained %s on %zu records, %.0f s, final epoch loss %.4f", label.c_str(), records.size(),
          t.seconds, t.result.telemetry.epochs.back().loss));
  return t;
}

MetricReport score(const Trained& t, std::span<const SampleRecord> records) {
  const auto& d = reference_domain();
  Network net(t.config, Shape3{d.nx, d.ny, d.nz});
  return evaluate(net, t.result.params, records);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <small config json> [artifact dir]\n");
    return 2;
  }
  const fs::path small_config = fs::absolute(argv[1]);
  artifacts = fs::absolute(argc > 2 ? fs::path(argv[2]) : fs::path("acceptance_artifacts"));
  fs::create_directories(artifacts);
  const auto start = Clock::now();

  guarded(1, "FEA oracle equivalence", fea_oracle);
  guarded(2, "Sensitivity correctness", sensitivity_fd);
  guarded(5, "Metric formulas", metric_cases);
  guarded(6, "Network gradient check", network_gradients);
  guarded(13, "Determinism", [&] { determinism(small_config); });

  const RunConfig defaults;
  const SimpConfig& simp = defaults.simp;
  Corpus corpus;
  bool have_corpus = false;
  guarded(3, "Optimizer contract", [&] {
    corpus = solve_corpus(simp);
    have_corpus = true;
    optimizer_and_mapping(std::span(corpus.test).first(20), simp);
  });
  if (!have_corpus) {
    for (int id : {4, 7, 8, 9, 10, 11, 12}) report(id, "corpus unavailable", false, "SIMP corpus failed");
  } else {
    TrainConfig tc = defaults.train;
    tc.seed = derive_seed(kRunSeed, 4, 0);
    const auto train30 = strategy_records(corpus.train, PairStrategy::poisson30, kPairs, derive_seed(kRunSeed, 2, 0));
    const auto train5 = strategy_records(corpus.train, PairStrategy::poisson5, kPairs, derive_seed(kRunSeed, 2, 1));
    const auto test = fixed_pair_records(corpus.test, 20, 15);

    guarded(7, "Overfit sanity", [&] {
      const std::vector<SampleRecord> eight(train30.begin(), train30.begin() + 8);
      TrainConfig oc = tc;
      oc.epochs = 62;  // 496 steps
      // The default rate is tuned for smooth 30-epoch runs and is still
      // climbing at step 496; the memorization check runs hotter.
      const auto slow = score(train_on(eight, {0, 1}, oc, "overfit, default lr"), eight);
      oc.learning_rate = 0.05;
      const auto t = train_on(eight, {0, 1}, oc, "overfit");
      const auto m = score(t, eight);
      report(7, "Overfit sanity", m.binary_accuracy >= 0.98 && t.result.telemetry.steps.size() <= 500,
             fmt("8 records, %zu steps at lr %.2f, binary accuracy %.4f (>= 0.98); default lr %.2f gives %.4f",
                 t.result.telemetry.steps.size(), oc.learning_rate, m.binary_accuracy, tc.learning_rate,
                 slow.binary_accuracy));
    });

    Trained dg;
    bool have_dg = false;
    guarded(8, "Desk-scale generalization", [&] {
      dg = train_on(train30, {0, 1}, tc, "density+gradient/poisson30");
      have_dg = true;
      const auto m = score(dg, test);
      write_file(artifacts / "telemetry_steps.csv", telemetry_steps_csv(dg.result.telemetry));
      write_file(artifacts / "telemetry_epochs.csv", telemetry_epochs_csv(dg.result.telemetry));
      report(8, "Desk-scale generalization", m.binary_accuracy >= 0.85 && m.rms_accuracy >= 0.60 &&
                                                 train30.size() >= 500 && test.size() >= 100,
             fmt("%zu train records (poisson30), %d epochs, %zu test records at (20, 15): binary %.4f (>= 0.85), "
                 "rms %.4f (>= 0.60); reference 0.962 / 0.797, gap %+.4f / %+.4f; %.0f s training",
                 train30.size(), tc.epochs, test.size(), m.binary_accuracy, m.rms_accuracy,
                 m.binary_accuracy - 0.962, m.rms_accuracy - 0.797, dg.seconds));
    });

    guarded(12, "Training telemetry", [&] {
      if (!have_dg) throw std::runtime_error("criterion 8 network missing");
      const auto& ep = dg.result.telemetry.epochs;
      std::size_t violations = 0;
      for (std::size_t i = 1; i < ep.size(); ++i)
        if (ep[i].loss > ep[i - 1].loss) ++violations;
      std::size_t first_epoch = 0;
      for (const auto& s : dg.result.telemetry.steps)
        if (s.epoch == 0) ++first_epoch;
      const bool emitted = fs::file_size(artifacts / "telemetry_steps.csv") > 0;
      report(12, "Training telemetry",
             ep.size() == 30 && violations <= 2 && first_epoch == train30.size() && emitted,
             fmt("%zu epochs, loss %.4f -> %.4f, %zu increases (<= 2); first-epoch step curve %zu points in %s",
                 ep.size(), ep.front().loss, ep.back().loss, violations, first_epoch,
                 (artifacts / "telemetry_steps.csv").c_str()));
    });

    guarded(9, "Orderings", [&] {
      if (!have_dg) throw std::runtime_error("criterion 8 network missing");
      const auto grad_only = train_on(train30, channels_for(kGroupGradient), tc, "gradient");
      const auto boundary_only = train_on(train30, channels_for(kGroupBoundary), tc, "boundary");
      const auto p5 = train_on(train5, {0, 1}, tc, "density+gradient/poisson5");
      const double a_dg = score(dg, test).binary_accuracy;
      const double a_g = score(grad_only, test).binary_accuracy;
      const double a_b = score(boundary_only, test).binary_accuracy;
      const double a_p5 = score(p5, test).binary_accuracy;
      report(9, "Orderings", a_dg >= a_g && a_g >= a_b && a_dg >= a_p5,
             fmt("density+gradient %.4f >= gradient %.4f >= boundary %.4f; poisson30 %.4f >= poisson5 %.4f",
                 a_dg, a_g, a_b, a_dg, a_p5));
    });

    guarded(10, "Iteration-grid trend", [&] {
      if (!have_dg) throw std::runtime_error("criterion 8 network missing");
      std::vector<IterationTrace> deep;
      for (const auto& t : corpus.test)
        if (t.final_iteration() >= 35) deep.push_back(t);
      const std::vector<std::size_t> ms{5, 10, 15, 20, 25, 30, 35};
      const auto& d = reference_domain();
      Network net(dg.config, Shape3{d.nx, d.ny, d.nz});
      const auto g = iteration_grid(deep, net, dg.result.params, ms, ms);
      write_file(artifacts / "grid_binary.csv", grid_to_csv(g, false));
      write_file(artifacts / "grid_rms.csv", grid_to_csv(g, true));
      const auto inv = grid_inversions(g);
      std::ostringstream s;
      for (std::size_t i = 0; i < inv.size(); ++i) s << (i ? " " : "") << inv[i];
      report(10, "Iteration-grid trend", std::all_of(inv.begin(), inv.end(), [](std::size_t v) { return v <= 1; }),
             fmt("%zu traces with T >= 35, inversions per n column {5..35}: %s (<= 1 each)", deep.size(),
                 s.str().c_str()));
    });

    corpus = {};
    guarded(11, "Hybrid speedup", [&] {
      if (!have_dg) throw std::runtime_error("criterion 8 network missing");
      const auto& d = reference_domain();
      Network net(dg.config, Shape3{d.nx, d.ny, d.nz});
      std::vector<HybridResult> rows;
      for (std::size_t i = 0; i < 20; ++i) {
        auto r = hybrid_run(sample_problem(hybrid_seed(kRunSeed, i), d), simp, net, dg.result.params);
        r.prediction = {};
        r.ground_truth = {};
        rows.push_back(std::move(r));
      }
      write_file(artifacts / "hybrid.csv", hybrid_to_csv(rows));
      write_file(artifacts / "hybrid_timing.csv", hybrid_timing_csv(rows));
      double speed = 0, acc = 0;
      std::size_t fallbacks = 0;
      for (const auto& r : rows) {
        speed += r.speedup;
        acc += r.metrics.binary_accuracy;
        fallbacks += r.fallback;
      }
      speed /= 20.0;
      acc /= 20.0;
      report(11, "Hybrid speedup", speed >= 0.30 && acc >= 0.85,
             fmt("20 problems, mean wall-time reduction %.3f (>= 0.30), mean binary accuracy %.4f (>= 0.85), "
                 "%zu fallbacks",
                 speed, acc, fallbacks));
    });
  }

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  std::ostringstream summary;
  std::size_t passed = 0;
  for (const auto& v : verdicts) {
    summary << (v.pass ? "PASS" : "FAIL") << " " << v.id << " " << v.name << ": " << v.detail << "\n";
    passed += v.pass;
  }
  summary << passed << "/" << verdicts.size() << " criteria passed in " << fmt("%.0f", seconds_since(start))
          << " s\n";
  write_file(artifacts / "acceptance_summary.txt", summary.str());
  std::printf("\n%s", summary.str().c_str());
  return passed == verdicts.size() && verdicts.size() == 13 ? 0 : 1;
}

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "topo3d/eval.hpp"
#include "topo3d/io.hpp"
#include "topo3d/pipeline.hpp"
#include "topo3d/sampler.hpp"

using namespace topo3d;

namespace {

const DesignDomain& small_domain() {
  static const DesignDomain d = build_domain(8, 4, 4, 2, 1, 1);
  return d;
}

std::vector<IterationTrace> small_traces(std::size_t count) {
  std::vector<IterationTrace> out;
  for (std::uint64_t s = 1; out.size() < count; ++s) {
    auto t = run_simp(sample_problem(s, small_domain()), SimpConfig{});
    if (t.final_iteration() >= 12) out.push_back(std::move(t));
  }
  return out;
}

NetworkConfig small_net() { return reference_network({0, 1}); }

}  // namespace

TEST_CASE("iteration grid layout") {
  const auto traces = small_traces(2);
  Network net(small_net(), Shape3{8, 4, 4});
  const auto params = init_parameters(small_net(), 1);
  const std::vector<std::size_t> ms{4, 8, 12}, ns{4, 8};
  const auto g = iteration_grid(traces, net, params, ms, ns);
  CHECK(g.binary.size() == 6);
  CHECK_FALSE(g.binary_at(0, 0).has_value());
  CHECK_FALSE(g.binary_at(1, 1).has_value());
  CHECK(g.binary_at(2, 0).has_value());
  CHECK(g.binary_at(0, 1).has_value());  // n > m is allowed, only m == n is absent
  for (std::size_t i = 0; i < g.binary.size(); ++i) CHECK(g.binary[i].has_value() == g.rms[i].has_value());
  const auto csv = grid_to_csv(g, false);
  CHECK(csv.rfind("m\\n,4,8\n", 0) == 0);
  CHECK(csv.find("\n4,-,") != std::string::npos);
  const std::vector<std::size_t> too_deep{500};
  CHECK_THROWS_AS(iteration_grid(traces, net, params, too_deep, ns), Error);
}

TEST_CASE("grid inversion count") {
  IterationGrid g;
  g.m_list = {10, 20, 30, 40};
  g.n_list = {5, 20};
  g.binary = {0.8, 0.7, 0.85, std::nullopt, 0.84, 0.75, 0.9, 0.74};
  g.rms = g.binary;
  const auto inv = grid_inversions(g);
  CHECK(inv == std::vector<std::size_t>{1, 1});
}

TEST_CASE("record builders") {
  const auto traces = small_traces(3);
  const auto fixed = fixed_pair_records(traces, 10, 6);
  REQUIRE(fixed.size() == 3);
  for (const auto& r : fixed) {
    CHECK(r.m == 10);
    CHECK(r.n == 6);
  }
  const auto drawn = strategy_records(traces, PairStrategy::poisson5, 4, 9);
  CHECK(drawn.size() == 12);
  CHECK(strategy_records(traces, PairStrategy::poisson5, 4, 9) == drawn);
  for (const auto& r : drawn) CHECK_NOTHROW(validate_record(r));
}

TEST_CASE("hybrid run, ordinary and fallback") {
  const auto p = sample_problem(3, small_domain());
  Network net(small_net(), Shape3{8, 4, 4});
  const auto params = init_parameters(small_net(), 2);
  HybridOptions opt;
  const auto r = hybrid_run(p, SimpConfig{}, net, params, opt);
  const auto full = run_simp(p, SimpConfig{});
  CHECK(r.final_iteration == full.final_iteration());
  CHECK(r.ground_truth == full.final_density());
  if (!r.fallback) {
    CHECK(r.cutoff <= r.final_iteration);
    CHECK(r.cutoff_ms <= r.full_ms);
    CHECK(r.speedup == doctest::Approx(1.0 - (r.cutoff_ms + r.inference_ms) / r.full_ms));
    CHECK(r.prediction.density.size() == small_domain().element_count());
  }
  opt.tau = 0.0;
  const auto fb = hybrid_run(p, SimpConfig{}, net, params, opt);
  CHECK(fb.fallback);
  CHECK(fb.speedup <= 0.0);
  CHECK(fb.cutoff == fb.final_iteration);
  CHECK(fb.metrics.binary_accuracy == 1.0);
  const std::vector<HybridResult> rows{r, fb};
  const auto csv = hybrid_to_csv(rows);
  CHECK(csv.rfind("seed,cutoff,fallback,final_iteration,binary_accuracy,rms_accuracy\n", 0) == 0);
  CHECK(csv.find("_ms") == std::string::npos);
  CHECK(hybrid_timing_csv(rows).rfind("seed,cutoff_ms,inference_ms,full_ms,speedup\n", 0) == 0);
  opt.gap = 0;
  CHECK_THROWS_AS(hybrid_run(p, SimpConfig{}, net, params, opt), Error);
}

TEST_CASE("hybrid gap reproduces the (20, 15) pairing") {
  // m* = 20 and gap 5 give n = 15; checked through the encoded gradient channel.
  IterationTrace t;
  t.problem = sample_problem(5, small_domain());
  for (std::size_t i = 0; i <= 25; ++i) {
    TraceEntry e;
    e.iteration = i;
    e.density.assign(small_domain().element_count(), i / 25.0);
    t.entries.push_back(e);
  }
  const auto enc = encode_channels(t, 20, 20 - 5);
  CHECK(enc.channel(kDensityGradient)[0] == static_cast<float>(20 / 25.0 - 15 / 25.0));
}

TEST_CASE("trace directory round-trip") {
  const auto t = small_traces(1).front();
  const auto dir = std::filesystem::temp_directory_path() / "topo3d_trace_test";
  std::filesystem::remove_all(dir);
  save_trace(dir, t);
  const auto back = load_trace(dir);
  CHECK(back.problem == t.problem);
  CHECK(back.converged == t.converged);
  REQUIRE(back.entries.size() == t.entries.size());
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    CHECK(back.entries[i].compliance == t.entries[i].compliance);
    for (std::size_t v = 0; v < t.entries[i].density.size(); ++v)
      REQUIRE(back.entries[i].density[v] == static_cast<double>(static_cast<float>(t.entries[i].density[v])));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("problem documents round-trip and reject unknown keys") {
  const auto p = sample_problem(11, reference_domain());
  CHECK(problem_from_json(to_json(p)) == p);
  auto j = to_json(p);
  j["pressure"] = 1;
  CHECK_THROWS_AS(problem_from_json(j), Error);
}

TEST_CASE("seed streams are distinct") {
  CHECK(problem_seed(1, 0) != problem_seed(1, 1));
  CHECK(problem_seed(1, 0) != problem_seed(2, 0));
  CHECK(problem_seed(1, 0) != hybrid_seed(1, 0));
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
}

TEST_CASE("commands") {
  for (const auto& c : {"sample", "solve", "map-process", "build-dataset", "train", "predict",
                        "evaluate", "ablate", "grid", "hybrid"})
    CHECK(is_command(c));
  CHECK_FALSE(is_command("frobnicate"));
  CHECK(command_names().size() == 10);
}

#include "topo3d/config.hpp"

#include "topo3d/dataset.hpp"
#include "topo3d/error.hpp"
#include "topo3d/eval.hpp"
#include "topo3d/io.hpp"

namespace topo3d {

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, std::string("config: key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  check_keys(j, {"seed", "domain", "material", "sampler", "simp", "channels", "network", "train",
                 "dataset", "eval", "threads"},
             "config");
  RunConfig c;
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  if (j.contains("domain")) c.domain = domain_from_json(j.at("domain"));

  if (j.contains("material")) {
    const auto& m = j.at("material");
    check_keys(m, {"e0", "e_min", "penal", "nu"}, "material");
    read(m, "e0", c.simp.material.e0);
    read(m, "e_min", c.simp.material.e_min);
    read(m, "penal", c.simp.material.penal);
    read(m, "nu", c.simp.material.nu);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    check_keys(s, {"vf_mean", "vf_std", "vf_min", "vf_max", "load_lambda", "load_min", "load_max",
                   "anchor_fraction_max"},
               "sampler");
    read(s, "vf_mean", c.sampler.vf_mean);
    read(s, "vf_std", c.sampler.vf_std);
    read(s, "vf_min", c.sampler.vf_min);
    read(s, "vf_max", c.sampler.vf_max);
    read(s, "load_lambda", c.sampler.load_lambda);
    read(s, "load_min", c.sampler.load_min);
    read(s, "load_max", c.sampler.load_max);
    read(s, "anchor_fraction_max", c.sampler.anchor_fraction_max);
  }
  if (j.contains("simp")) {
    const auto& s = j.at("simp");
    check_keys(s, {"r_min_factor", "move", "damping", "change_tol", "max_iterations", "pcg_tol"},
               "simp");
    read(s, "r_min_factor", c.simp.r_min_factor);
    read(s, "move", c.simp.move);
    read(s, "damping", c.simp.damping);
    read(s, "change_tol", c.simp.change_tol);
    read(s, "max_iterations", c.simp.max_iterations);
    read(s, "pcg_tol", c.simp.pcg_tol);
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    check_keys(n, {"layers"}, "network");
    c.network = network_from_json({{"channels", std::vector<int>{}}, {"layers", n.at("layers")}});
  }
  unsigned groups = c.channel_groups;
  if (j.contains("channels")) {
    std::string text;
    read(j, "channels", text);
    groups = parse_channel_groups(text);
  }
  set_channel_groups(c, groups);

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, {"learning_rate", "momentum", "beta", "epochs", "epsilon"}, "train");
    read(t, "learning_rate", c.train.learning_rate);
    read(t, "momentum", c.train.momentum);
    read(t, "beta", c.train.beta);
    read(t, "epochs", c.train.epochs);
    read(t, "epsilon", c.train.epsilon);
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, {"problems", "pairs_per_problem", "strategy", "augment", "augment_fraction"},
               "dataset");
    read(d, "problems", c.dataset.problems);
    read(d, "pairs_per_problem", c.dataset.pairs_per_problem);
    read(d, "strategy", c.dataset.strategy);
    read(d, "augment", c.dataset.augment);
    read(d, "augment_fraction", c.dataset.augment_fraction);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, {"tau", "gap", "threshold", "test_m", "test_n", "grid_m", "grid_n",
                   "hybrid_problems"},
               "eval");
    read(e, "tau", c.eval.tau);
    read(e, "gap", c.eval.gap);
    read(e, "threshold", c.eval.threshold);
    read(e, "test_m", c.eval.test_m);
    read(e, "test_n", c.eval.test_n);
    read(e, "grid_m", c.eval.grid_m);
    read(e, "grid_n", c.eval.grid_n);
    read(e, "hybrid_problems", c.eval.hybrid_problems);
  }
  validate_config(c);
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  const auto& m = c.simp.material;
  const auto& s = c.sampler;
  nlohmann::json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["domain"] = to_json(c.domain);
  j["material"] = {{"e0", m.e0}, {"e_min", m.e_min}, {"penal", m.penal}, {"nu", m.nu}};
  j["sampler"] = {{"vf_mean", s.vf_mean},         {"vf_std", s.vf_std},
                  {"vf_min", s.vf_min},           {"vf_max", s.vf_max},
                  {"load_lambda", s.load_lambda}, {"load_min", s.load_min},
                  {"load_max", s.load_max},       {"anchor_fraction_max", s.anchor_fraction_max}};
  j["simp"] = {{"r_min_factor", c.simp.r_min_factor}, {"move", c.simp.move},
               {"damping", c.simp.damping},           {"change_tol", c.simp.change_tol},
               {"max_iterations", c.simp.max_iterations}, {"pcg_tol", c.simp.pcg_tol}};
  j["channels"] = [&] {
    std::string out;
    for (unsigned g : {kGroupDensity, kGroupGradient, kGroupBoundary})
      if (c.channel_groups & g) out += (out.empty() ? "" : ",") + channel_groups_name(g);
    return out;
  }();
  j["network"] = {{"layers", to_json(c.network).at("layers")}};
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"momentum", c.train.momentum},
                {"beta", c.train.beta},                   {"epochs", c.train.epochs},
                {"epsilon", c.train.epsilon}};
  j["dataset"] = {{"problems", c.dataset.problems},
                  {"pairs_per_problem", c.dataset.pairs_per_problem},
                  {"strategy", c.dataset.strategy},
                  {"augment", c.dataset.augment},
                  {"augment_fraction", c.dataset.augment_fraction}};
  j["eval"] = {{"tau", c.eval.tau},         {"gap", c.eval.gap},
               {"threshold", c.eval.threshold}, {"test_m", c.eval.test_m},
               {"test_n", c.eval.test_n},   {"grid_m", c.eval.grid_m},
               {"grid_n", c.eval.grid_n},   {"hybrid_problems", c.eval.hybrid_problems}};
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::invalid_config, path.string() + ": " + e.what());
  }
}

void set_channel_groups(RunConfig& c, unsigned groups) {
  c.channel_groups = groups;
  c.network = with_channels(c.network, channels_for(groups));
}

void validate_config(const RunConfig& c) {
  auto check = [](bool ok, const std::string& what) { require(ok, "config: " + what, ErrorCode::invalid_config); };
  check(c.threads >= 1, "threads must be >= 1");
  validate_material(c.simp.material);
  validate_sampler(c.sampler);
  check(c.simp.r_min_factor > 0.0, "simp.r_min_factor must be positive");
  check(c.simp.move > 0.0 && c.simp.move <= 1.0, "simp.move must lie in (0, 1]");
  check(c.simp.damping > 0.0, "simp.damping must be positive");
  check(c.simp.change_tol > 0.0, "simp.change_tol must be positive");
  check(c.simp.max_iterations >= 1, "simp.max_iterations must be >= 1");
  check(c.simp.pcg_tol > 0.0 && c.simp.pcg_tol < 1.0, "simp.pcg_tol must lie in (0, 1)");
  validate_network(c.network, {c.domain.nx, c.domain.ny, c.domain.nz});
  validate_train_config(c.train);
  check(c.dataset.problems >= 3, "dataset.problems must be >= 3");
  check(c.dataset.pairs_per_problem >= 1, "dataset.pairs_per_problem must be >= 1");
  parse_strategy(c.dataset.strategy);
  check(c.dataset.augment_fraction >= 0.0 && c.dataset.augment_fraction <= 1.0,
        "dataset.augment_fraction must lie in [0, 1]");
  check(c.eval.tau >= 0.0, "eval.tau must be >= 0");
  check(c.eval.gap >= 1, "eval.gap must be >= 1");
  check(c.eval.threshold > 0.0 && c.eval.threshold < 1.0, "eval.threshold must lie in (0, 1)");
  check(c.eval.test_n < c.eval.test_m, "eval.test_n must be below eval.test_m");
  check(!c.eval.grid_m.empty() && !c.eval.grid_n.empty(), "eval grid lists must be non-empty");
  check(c.eval.hybrid_problems >= 1, "eval.hybrid_problems must be >= 1");
}

}  // namespace topo3d

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topo3d/domain.hpp"
#include "topo3d/net.hpp"
#include "topo3d/sampler.hpp"
#include "topo3d/simp.hpp"

namespace topo3d {

struct DatasetSettings {
  std::size_t problems = 160;
  std::size_t pairs_per_problem = 4;
  std::string strategy = "poisson30";
  bool augment = false;
  double augment_fraction = 0.4;
};

struct EvalSettings {
  double tau = 0.05;
  std::size_t gap = 5;
  double threshold = 0.5;
  std::size_t test_m = 20;
  std::size_t test_n = 15;
  std::vector<std::size_t> grid_m{5, 10, 15, 20, 25, 30, 35};
  std::vector<std::size_t> grid_n{5, 10, 15, 20, 25, 30, 35};
  std::size_t hybrid_problems = 20;
};

// Everything a run needs; serialised in full into every provenance file.
struct RunConfig {
  std::uint64_t seed = 1;
  DesignDomain domain = reference_domain();
  SamplerConfig sampler;
  SimpConfig simp;  // material lives here
  unsigned channel_groups = 3;  // density + gradient
  NetworkConfig network = reference_network({0, 1});
  TrainConfig train;
  DatasetSettings dataset;
  EvalSettings eval;
  int threads = 1;
};

// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

// Range checks across all sections.
void validate_config(const RunConfig& config);

// Sets channel_groups and rewires the network's input layer to match.
void set_channel_groups(RunConfig& config, unsigned groups);

}  // namespace topo3d

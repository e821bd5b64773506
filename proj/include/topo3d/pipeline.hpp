#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "topo3d/config.hpp"
#include "topo3d/simp.hpp"

namespace topo3d {

inline constexpr const char* kVersion = "0.1.0";

// Paths and per-command knobs that are not part of the frozen config.
struct CommandInputs {
  std::filesystem::path input;  // problem file, trace or dataset directory
  std::filesystem::path model;  // checkpoint
  std::size_t m = 0;            // 0: use eval.test_m
  std::size_t n = 0;            // used only when m is set
  std::vector<std::string> strategies;  // ablate: compare these instead of channel subsets
  bool timing = false;          // solve: add the wall-clock column
};

const std::vector<std::string>& command_names();
bool is_command(const std::string& name);

// Runs one pipeline stage and writes its artifacts plus provenance.json to `out`.
void run_command(const std::string& command, const RunConfig& config,
                 const std::filesystem::path& out, const CommandInputs& inputs = {});

// A trace on disk: densities.fld (one field per iterate) and trace.json.
void save_trace(const std::filesystem::path& dir, const IterationTrace& trace);
IterationTrace load_trace(const std::filesystem::path& dir);

// Seeds of the problems a dataset run draws, in order.
std::uint64_t problem_seed(std::uint64_t run_seed, std::size_t index);
std::uint64_t hybrid_seed(std::uint64_t run_seed, std::size_t index);

}  // namespace topo3d

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "topo3d/io.hpp"
#include "topo3d/rng.hpp"
#include "topo3d/simp.hpp"

namespace topo3d {

inline constexpr int kChannelCount = 8;

enum Channel : int {
  kDensity = 0,
  kDensityGradient = 1,
  kForceX = 2,
  kForceY = 3,
  kForceZ = 4,
  kConstraintX = 5,
  kConstraintY = 6,
  kConstraintZ = 7,
};

// Eight stacked voxel fields, channel-major, each x-fastest.
struct ChannelTensor {
  GridDims dims;
  std::vector<float> data;

  std::span<float> channel(int c) {
    return {data.data() + static_cast<std::size_t>(c) * dims.voxels(), dims.voxels()};
  }
  std::span<const float> channel(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * dims.voxels(), dims.voxels()};
  }
  bool operator==(const ChannelTensor&) const = default;
};

// Rotations mapping the box onto itself; those swapping y and z need
// ny == nz. The last two (half turns about the yz diagonals) only arise as
// compositions and are not drawn by augmentation.
enum class Symmetry : std::uint32_t {
  identity = 0,
  x90 = 1,
  x180 = 2,
  x270 = 3,
  y180 = 4,
  z180 = 5,
  diag180 = 6,
  antidiag180 = 7,
};

struct SampleRecord {
  ChannelTensor input;
  std::vector<float> target;  // final iterate
  std::uint32_t m = 0;
  std::uint32_t n = 0;
  std::uint32_t final_iteration = 0;  // T
  std::uint64_t seed = 0;
  Symmetry symmetry = Symmetry::identity;

  bool operator==(const SampleRecord&) const = default;
};

void validate_record(const SampleRecord& record);

// Force (3) and constraint (3) channels of a problem, from node-level data.
std::vector<float> boundary_channels(const DesignDomain& domain,
                                     std::span<const double> nodal_forces, const DofMap& dofs);

// boundary_channels for a problem's own loads and supports.
std::vector<float> problem_boundary(const ProblemSpec& problem);

// Unordered pair: the gradient channel is density_m - density_n either way.
ChannelTensor encode_fields(const DesignDomain& domain, std::span<const double> density_m,
                            std::span<const double> density_n,
                            std::span<const float> boundary);

ChannelTensor encode_channels(const IterationTrace& trace, std::size_t m, std::size_t n);

SampleRecord make_record(const IterationTrace& trace, std::size_t m, std::size_t n);

enum class PairStrategy { uniform, poisson5, poisson10, poisson30 };

std::string strategy_name(PairStrategy s);
PairStrategy parse_strategy(const std::string& name);

struct IterationPair {
  std::size_t m = 0;
  std::size_t n = 0;
};

// m per strategy redrawn into [1, T-1]; n uniform in [0, m-1].
IterationPair sample_iteration_pair(PairStrategy strategy, std::size_t final_iteration, Rng& rng);

SampleRecord rotate_record(const SampleRecord& record, Symmetry symmetry);

// One symmetry drawn uniformly from those the grid admits.
SampleRecord augment_rotate(const SampleRecord& record, Rng& rng);

// Replaces each record by a random rotation of itself with probability `fraction`.
std::vector<SampleRecord> augment_dataset(std::span<const SampleRecord> records, double fraction,
                                          Rng& rng);

// Index remap and force-sign table of a symmetry, exposed for tests.
struct SymmetryAction {
  std::array<int, 3> axis_of;   // new axis a receives old axis axis_of[a]
  std::array<int, 3> sign;      // sign applied along new axis a
};
SymmetryAction symmetry_action(Symmetry s);

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

struct DatasetManifest {
  std::size_t record_count = 0;
  std::vector<Split> assignment;
  std::string strategy;
  std::uint32_t format_version = 0;
  std::vector<std::uint64_t> seeds;

  std::vector<std::size_t> indices(Split split) const;
};

// floor(3N/4) train, floor(N/12) validation, remainder test, seeded shuffle.
DatasetManifest split_dataset(std::size_t record_count, std::uint64_t seed);

nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

// Record shard: magic TOPO3DDS, u32 version, u32 dims x3, u64 count; each
// record has 32 bytes of metadata then 9 float32 fields.
inline constexpr char kDatasetMagic[8] = {'T', 'O', 'P', 'O', '3', 'D', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_records(GridDims dims, std::span<const SampleRecord> records);
std::vector<SampleRecord> decode_records(std::string_view bytes);
void write_records(const std::filesystem::path& path, std::span<const SampleRecord> records);
std::vector<SampleRecord> read_records(const std::filesystem::path& path);

}  // namespace topo3d

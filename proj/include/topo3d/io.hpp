#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "topo3d/domain.hpp"

namespace topo3d {

// Little-endian primitives shared by the binary formats.
namespace le {
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);

class Reader {
 public:
  Reader(std::string_view bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}
  std::string_view take(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  void f32_array(float* out, std::size_t n);
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};
}  // namespace le

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

struct GridDims {
  std::uint32_t nx = 0, ny = 0, nz = 0;
  std::size_t voxels() const { return static_cast<std::size_t>(nx) * ny * nz; }
  bool operator==(const GridDims&) const = default;
};

GridDims dims_of(const DesignDomain& domain);

// Field file: magic TOPO3DFD, u32 version, u32 dims x3, u64 field count,
// then float32 fields, x-fastest.
inline constexpr char kFieldMagic[8] = {'T', 'O', 'P', 'O', '3', 'D', 'F', 'D'};
inline constexpr std::uint32_t kFieldVersion = 1;

struct FieldSet {
  GridDims dims;
  std::vector<std::vector<float>> fields;
};

std::string encode_fields(const FieldSet& set);
FieldSet decode_fields(std::string_view bytes);
void write_fields(const std::filesystem::path& path, const FieldSet& set);
FieldSet read_fields(const std::filesystem::path& path);

// Legacy VTK structured-points, ASCII, one cell scalar.
std::string to_vtk(const DesignDomain& domain, const std::vector<double>& field,
                   const std::string& name);

// Rejects keys outside `allowed` with invalid_config.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* what);

nlohmann::json to_json(const DesignDomain& domain);
DesignDomain domain_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProblemSpec& problem);
ProblemSpec problem_from_json(const nlohmann::json& j);

void save_problem(const std::filesystem::path& path, const ProblemSpec& problem);
ProblemSpec load_problem(const std::filesystem::path& path);

}  // namespace topo3d

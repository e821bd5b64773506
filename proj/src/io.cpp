#include "topo3d/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "topo3d/error.hpp"

namespace topo3d {

namespace le {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::string_view Reader::take(std::size_t n) {
  if (remaining() < n)
    fail(ErrorCode::truncated, context_ + ": truncated payload at byte " + std::to_string(pos_));
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t Reader::u32() {
  const auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t Reader::u64() {
  const auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

void Reader::f32_array(float* out, std::size_t n) {
  const auto b = take(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[4 * i + k])) << (8 * k);
    out[i] = std::bit_cast<float>(v);
  }
}

}  // namespace le

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "short write to " + path.string());
}

GridDims dims_of(const DesignDomain& d) {
  return {static_cast<std::uint32_t>(d.nx), static_cast<std::uint32_t>(d.ny),
          static_cast<std::uint32_t>(d.nz)};
}

std::string encode_fields(const FieldSet& set) {
  std::string out;
  out.reserve(32 + set.fields.size() * set.dims.voxels() * 4);
  out.append(kFieldMagic, 8);
  le::put_u32(out, kFieldVersion);
  le::put_u32(out, set.dims.nx);
  le::put_u32(out, set.dims.ny);
  le::put_u32(out, set.dims.nz);
  le::put_u64(out, set.fields.size());
  for (const auto& f : set.fields) {
    require(f.size() == set.dims.voxels(), "field file: field size mismatch", ErrorCode::shape_mismatch);
    for (float v : f) le::put_f32(out, v);
  }
  return out;
}

FieldSet decode_fields(std::string_view bytes) {
  le::Reader r(bytes, "field file");
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kFieldMagic, 8) != 0)
    fail(ErrorCode::bad_magic, "field file: bad magic");
  r.take(8);
  const auto version = r.u32();
  if (version != kFieldVersion)
    fail(ErrorCode::version_mismatch, "field file: unsupported version " + std::to_string(version));
  FieldSet set;
  set.dims.nx = r.u32();
  set.dims.ny = r.u32();
  set.dims.nz = r.u32();
  const auto count = r.u64();
  if (count * set.dims.voxels() * 4 > r.remaining())
    fail(ErrorCode::truncated, "field file: truncated payload");
  set.fields.resize(count);
  for (auto& f : set.fields) {
    f.resize(set.dims.voxels());
    r.f32_array(f.data(), f.size());
  }
  return set;
}

void write_fields(const std::filesystem::path& path, const FieldSet& set) {
  write_file(path, encode_fields(set));
}

FieldSet read_fields(const std::filesystem::path& path) { return decode_fields(read_file(path)); }

std::string to_vtk(const DesignDomain& d, const std::vector<double>& field, const std::string& name) {
  require(field.size() == d.element_count(), "vtk: field size mismatch", ErrorCode::shape_mismatch);
  std::ostringstream out;
  out.precision(9);
  out << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << d.nx + 1 << ' ' << d.ny + 1 << ' ' << d.nz + 1 << '\n';
  out << "ORIGIN 0 0 0\nSPACING " << d.h << ' ' << d.h << ' ' << d.h << '\n';
  out << "CELL_DATA " << d.element_count() << "\nSCALARS " << name << " float 1\n";
  out << "LOOKUP_TABLE default\n";
  for (double v : field) out << static_cast<float>(v) << '\n';
  return out.str();
}

namespace {

const char* face_name(Face f) {
  static constexpr const char* names[] = {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"};
  return names[static_cast<int>(f)];
}

Face face_from_name(const std::string& s) {
  static constexpr const char* names[] = {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"};
  for (int i = 0; i < 6; ++i)
    if (s == names[i]) return static_cast<Face>(i);
  fail(ErrorCode::invalid_argument, "problem: unknown face '" + s + "'");
}

}  // namespace

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* what) {
  require(j.is_object(), std::string(what) + ": expected an object", ErrorCode::invalid_config);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    require(ok, std::string(what) + ": unknown key '" + key + "'", ErrorCode::invalid_config);
  }
}

nlohmann::json to_json(const DesignDomain& d) {
  return {{"nx", d.nx}, {"ny", d.ny}, {"nz", d.nz}, {"lx", d.lx}, {"ly", d.ly}, {"lz", d.lz}};
}

DesignDomain domain_from_json(const nlohmann::json& j) {
  check_keys(j, {"nx", "ny", "nz", "lx", "ly", "lz"}, "domain");
  try {
    return build_domain(j.at("nx").get<int>(), j.at("ny").get<int>(), j.at("nz").get<int>(),
                        j.at("lx").get<double>(), j.at("ly").get<double>(),
                        j.at("lz").get<double>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, std::string("domain: ") + e.what());
  }
}

nlohmann::json to_json(const ProblemSpec& p) {
  nlohmann::json loads = nlohmann::json::array();
  for (const auto& l : p.loads) {
    loads.push_back({{"face", face_name(l.face)},
                     {"u", l.u},
                     {"v", l.v},
                     {"direction", l.direction},
                     {"magnitude", l.magnitude}});
  }
  return {{"domain", to_json(p.domain)},
          {"volume_fraction", p.volume_fraction},
          {"bc_case", p.bc_case},
          {"seed", p.seed},
          {"loads", loads}};
}

ProblemSpec problem_from_json(const nlohmann::json& j) {
  check_keys(j, {"domain", "volume_fraction", "bc_case", "seed", "loads"}, "problem");
  ProblemSpec p;
  try {
    p.domain = domain_from_json(j.at("domain"));
    p.volume_fraction = j.at("volume_fraction").get<double>();
    p.bc_case = j.at("bc_case").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& lj : j.at("loads")) {
      check_keys(lj, {"face", "u", "v", "direction", "magnitude"}, "load");
      Load l;
      l.face = face_from_name(lj.at("face").get<std::string>());
      l.u = lj.at("u").get<double>();
      l.v = lj.at("v").get<double>();
      l.direction = lj.at("direction").get<Vec3>();
      l.magnitude = lj.at("magnitude").get<double>();
      p.loads.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, std::string("problem: ") + e.what());
  }
  validate_problem(p);
  return p;
}

void save_problem(const std::filesystem::path& path, const ProblemSpec& problem) {
  write_file(path, to_json(problem).dump(2) + "\n");
}

ProblemSpec load_problem(const std::filesystem::path& path) {
  try {
    return problem_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::invalid_config, path.string() + ": " + e.what());
  }
}

}  // namespace topo3d

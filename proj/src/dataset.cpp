#include "topo3d/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "topo3d/error.hpp"

namespace topo3d {

std::vector<float> boundary_channels(const DesignDomain& d, std::span<const double> forces,
                                     const DofMap& dofs) {
  require(forces.size() == d.dof_count(), "boundary_channels: force vector length mismatch",
          ErrorCode::shape_mismatch);
  const auto nv = d.element_count();
  std::vector<float> out(6 * nv, 0.0f);
  for (std::size_t e = 0; e < nv; ++e) {
    const auto nodes = d.element_nodes(e);
    const bool surface = d.is_surface_element(e);
    for (int a = 0; a < 3; ++a) {
      double f = 0.0;
      bool fixed = false;
      for (auto node : nodes) {
        f += forces[3 * node + a];
        fixed = fixed || dofs.is_fixed(node, a);
      }
      out[static_cast<std::size_t>(a) * nv + e] = static_cast<float>(f / 8.0);
      out[static_cast<std::size_t>(3 + a) * nv + e] = fixed ? 1.0f : (surface ? -1.0f : 0.0f);
    }
  }
  return out;
}

std::vector<float> problem_boundary(const ProblemSpec& p) {
  return boundary_channels(p.domain, assemble_forces(p), fixed_dofs_for_case(p.bc_case, p.domain));
}

ChannelTensor encode_fields(const DesignDomain& d, std::span<const double> xm,
                            std::span<const double> xn, std::span<const float> boundary) {
  const auto nv = d.element_count();
  require(xm.size() == nv && xn.size() == nv && boundary.size() == 6 * nv,
          "encode: field size mismatch", ErrorCode::shape_mismatch);
  ChannelTensor t;
  t.dims = dims_of(d);
  t.data.resize(kChannelCount * nv);
  auto density = t.channel(kDensity);
  auto gradient = t.channel(kDensityGradient);
  for (std::size_t i = 0; i < nv; ++i) {
    density[i] = static_cast<float>(xm[i]);
    gradient[i] = static_cast<float>(xm[i] - xn[i]);
  }
  std::copy(boundary.begin(), boundary.end(), t.data.begin() + 2 * static_cast<std::ptrdiff_t>(nv));
  return t;
}

ChannelTensor encode_channels(const IterationTrace& trace, std::size_t m, std::size_t n) {
  require(n < m, "encode_channels: need n < m");
  require(m <= trace.final_iteration(), "encode_channels: m beyond the final iteration");
  return encode_fields(trace.problem.domain, trace.entries[m].density, trace.entries[n].density,
                       problem_boundary(trace.problem));
}

SampleRecord make_record(const IterationTrace& trace, std::size_t m, std::size_t n) {
  SampleRecord r;
  r.input = encode_channels(trace, m, n);
  const auto& fin = trace.final_density();
  r.target.assign(fin.begin(), fin.end());
  r.m = static_cast<std::uint32_t>(m);
  r.n = static_cast<std::uint32_t>(n);
  r.final_iteration = static_cast<std::uint32_t>(trace.final_iteration());
  r.seed = trace.problem.seed;
  return r;
}

void validate_record(const SampleRecord& r) {
  const auto nv = r.input.dims.voxels();
  require(r.input.data.size() == kChannelCount * nv && r.target.size() == nv,
          "record: tensor size mismatch", ErrorCode::shape_mismatch);
  require(r.n < r.m && r.m <= r.final_iteration, "record: need n < m <= T");
  require(static_cast<std::uint32_t>(r.symmetry) <= 7, "record: unknown symmetry");
  auto in_range = [](std::span<const float> c, float lo, float hi) {
    return std::all_of(c.begin(), c.end(), [&](float v) { return v >= lo && v <= hi; });
  };
  require(in_range(r.input.channel(kDensity), 0.0f, 1.0f), "record: density outside [0, 1]");
  require(in_range(r.input.channel(kDensityGradient), -1.0f, 1.0f),
          "record: density gradient outside [-1, 1]");
  for (int c = kConstraintX; c <= kConstraintZ; ++c) {
    for (float v : r.input.channel(c))
      require(v == -1.0f || v == 0.0f || v == 1.0f, "record: constraint flag not in {-1, 0, 1}");
  }
  for (int c = kForceX; c <= kForceZ; ++c)
    for (float v : r.input.channel(c)) require(std::isfinite(v), "record: non-finite force", ErrorCode::non_finite);
  require(in_range(r.target, 0.0f, 1.0f), "record: target outside [0, 1]");
}

std::string strategy_name(PairStrategy s) {
  switch (s) {
    case PairStrategy::uniform: return "uniform";
    case PairStrategy::poisson5: return "poisson5";
    case PairStrategy::poisson10: return "poisson10";
    case PairStrategy::poisson30: return "poisson30";
  }
  return "unknown";
}

PairStrategy parse_strategy(const std::string& name) {
  for (auto s : {PairStrategy::uniform, PairStrategy::poisson5, PairStrategy::poisson10,
                 PairStrategy::poisson30})
    if (strategy_name(s) == name) return s;
  fail(ErrorCode::invalid_argument, "unknown sampling strategy '" + name + "'");
}

IterationPair sample_iteration_pair(PairStrategy strategy, std::size_t T, Rng& rng) {
  require(T >= 2, "sample_iteration_pair: need T >= 2");
  const auto hi = static_cast<std::int64_t>(T) - 1;
  std::int64_t m = 0;
  do {
    switch (strategy) {
      case PairStrategy::uniform: m = rng.uniform_int(1, static_cast<std::int64_t>(T)); break;
      case PairStrategy::poisson5: m = rng.poisson(5.0); break;
      case PairStrategy::poisson10: m = rng.poisson(10.0); break;
      case PairStrategy::poisson30: m = rng.poisson(30.0); break;
    }
  } while (m < 1 || m > hi);
  const auto n = rng.uniform_int(0, m - 1);
  return {static_cast<std::size_t>(m), static_cast<std::size_t>(n)};
}

SymmetryAction symmetry_action(Symmetry s) {
  switch (s) {
    case Symmetry::identity: return {{0, 1, 2}, {1, 1, 1}};
    case Symmetry::x90: return {{0, 2, 1}, {1, -1, 1}};
    case Symmetry::x180: return {{0, 1, 2}, {1, -1, -1}};
    case Symmetry::x270: return {{0, 2, 1}, {1, 1, -1}};
    case Symmetry::y180: return {{0, 1, 2}, {-1, 1, -1}};
    case Symmetry::z180: return {{0, 1, 2}, {-1, -1, 1}};
    case Symmetry::diag180: return {{0, 2, 1}, {-1, 1, 1}};
    case Symmetry::antidiag180: return {{0, 2, 1}, {-1, -1, -1}};
  }
  fail(ErrorCode::invalid_argument, "unknown symmetry");
}

namespace {

// `first` then `second`; the eight rotations form a closed group.
Symmetry compose(Symmetry first, Symmetry second) {
  const auto a = symmetry_action(first);
  const auto b = symmetry_action(second);
  SymmetryAction c;
  for (int k = 0; k < 3; ++k) {
    c.axis_of[k] = a.axis_of[b.axis_of[k]];
    c.sign[k] = b.sign[k] * a.sign[b.axis_of[k]];
  }
  for (std::uint32_t s = 0; s <= 7; ++s) {
    const auto candidate = symmetry_action(static_cast<Symmetry>(s));
    if (candidate.axis_of == c.axis_of && candidate.sign == c.sign) return static_cast<Symmetry>(s);
  }
  fail(ErrorCode::internal, "symmetry composition left the rotation group");
}

void rotate_scalar(std::span<const float> src, std::span<float> dst, GridDims dims,
                   const SymmetryAction& act) {
  const std::array<int, 3> n{static_cast<int>(dims.nx), static_cast<int>(dims.ny),
                             static_cast<int>(dims.nz)};
  std::array<int, 3> idx{};
  for (idx[2] = 0; idx[2] < n[2]; ++idx[2]) {
    for (idx[1] = 0; idx[1] < n[1]; ++idx[1]) {
      for (idx[0] = 0; idx[0] < n[0]; ++idx[0]) {
        std::array<int, 3> out{};
        for (int a = 0; a < 3; ++a) {
          const int b = act.axis_of[a];
          const int centred = 2 * idx[b] - (n[b] - 1);
          out[a] = (act.sign[a] * centred + (n[a] - 1)) / 2;
        }
        const auto from = static_cast<std::size_t>(idx[0]) +
                          static_cast<std::size_t>(n[0]) * (idx[1] + static_cast<std::size_t>(n[1]) * idx[2]);
        const auto to = static_cast<std::size_t>(out[0]) +
                        static_cast<std::size_t>(n[0]) * (out[1] + static_cast<std::size_t>(n[1]) * out[2]);
        dst[to] = src[from];
      }
    }
  }
}

}  // namespace

SampleRecord rotate_record(const SampleRecord& record, Symmetry symmetry) {
  const auto act = symmetry_action(symmetry);
  const auto dims = record.input.dims;
  const std::array<std::uint32_t, 3> n{dims.nx, dims.ny, dims.nz};
  for (int a = 0; a < 3; ++a)
    require(n[act.axis_of[a]] == n[a], "rotate_record: symmetry would change the grid shape");

  SampleRecord out = record;
  rotate_scalar(record.input.channel(kDensity), out.input.channel(kDensity), dims, act);
  rotate_scalar(record.input.channel(kDensityGradient), out.input.channel(kDensityGradient), dims, act);
  rotate_scalar(record.target, out.target, dims, act);
  std::vector<float> tmp(dims.voxels());
  for (int a = 0; a < 3; ++a) {
    const int b = act.axis_of[a];
    rotate_scalar(record.input.channel(kForceX + b), tmp, dims, act);
    auto dst = out.input.channel(kForceX + a);
    const auto sign = static_cast<float>(act.sign[a]);
    for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] = sign * tmp[i];
    rotate_scalar(record.input.channel(kConstraintX + b), out.input.channel(kConstraintX + a), dims, act);
  }
  out.symmetry = compose(record.symmetry, symmetry);
  return out;
}

SampleRecord augment_rotate(const SampleRecord& record, Rng& rng) {
  std::vector<Symmetry> allowed;
  if (record.input.dims.ny == record.input.dims.nz)
    allowed = {Symmetry::x90, Symmetry::x180, Symmetry::x270, Symmetry::y180, Symmetry::z180};
  else
    allowed = {Symmetry::x180, Symmetry::y180, Symmetry::z180};
  const auto pick = rng.uniform_int(0, static_cast<std::int64_t>(allowed.size()) - 1);
  return rotate_record(record, allowed[static_cast<std::size_t>(pick)]);
}

std::vector<SampleRecord> augment_dataset(std::span<const SampleRecord> records, double fraction,
                                          Rng& rng) {
  require(fraction >= 0.0 && fraction <= 1.0, "augment: fraction must lie in [0, 1]");
  std::vector<SampleRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (rng.uniform01() < fraction) out.push_back(augment_rotate(r, rng));
    else out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == split) out.push_back(i);
  return out;
}

DatasetManifest split_dataset(std::size_t count, std::uint64_t seed) {
  require(count >= 3, "split_dataset: need at least 3 records");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = count - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train = (3 * count) / 4;
  const std::size_t n_val = count / 12;
  DatasetManifest m;
  m.record_count = count;
  m.format_version = kDatasetVersion;
  m.assignment.assign(count, Split::test);
  for (std::size_t i = 0; i < n_train; ++i) m.assignment[order[i]] = Split::train;
  for (std::size_t i = n_train; i < n_train + n_val; ++i) m.assignment[order[i]] = Split::validation;
  return m;
}

nlohmann::json to_json(const DatasetManifest& m) {
  static constexpr const char* names[] = {"train", "validation", "test"};
  nlohmann::json split = nlohmann::json::array();
  for (auto s : m.assignment) split.push_back(names[static_cast<int>(s)]);
  return {{"record_count", m.record_count},
          {"strategy", m.strategy},
          {"format_version", m.format_version},
          {"seeds", m.seeds},
          {"split", split}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.record_count = j.at("record_count").get<std::size_t>();
    m.strategy = j.at("strategy").get<std::string>();
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& s : j.at("split")) {
      const auto name = s.get<std::string>();
      if (name == "train") m.assignment.push_back(Split::train);
      else if (name == "validation") m.assignment.push_back(Split::validation);
      else if (name == "test") m.assignment.push_back(Split::test);
      else fail(ErrorCode::invalid_config, "manifest: unknown split '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, std::string("manifest: ") + e.what());
  }
  require(m.assignment.size() == m.record_count, "manifest: split count mismatch",
          ErrorCode::invalid_config);
  return m;
}

std::string encode_records(GridDims dims, std::span<const SampleRecord> records) {
  const auto nv = dims.voxels();
  std::string out;
  out.reserve(32 + records.size() * (32 + 9 * nv * 4));
  out.append(kDatasetMagic, 8);
  le::put_u32(out, kDatasetVersion);
  le::put_u32(out, dims.nx);
  le::put_u32(out, dims.ny);
  le::put_u32(out, dims.nz);
  le::put_u64(out, records.size());
  for (const auto& r : records) {
    require(r.input.dims == dims, "write_records: record grid differs from shard grid",
            ErrorCode::shape_mismatch);
    validate_record(r);
    le::put_u32(out, r.m);
    le::put_u32(out, r.n);
    le::put_u32(out, r.final_iteration);
    le::put_u32(out, static_cast<std::uint32_t>(r.symmetry));
    le::put_u64(out, r.seed);
    le::put_u64(out, 0);  // reserved
    for (float v : r.input.data) le::put_f32(out, v);
    for (float v : r.target) le::put_f32(out, v);
  }
  return out;
}

std::vector<SampleRecord> decode_records(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kDatasetMagic, 8) != 0)
    fail(ErrorCode::bad_magic, "dataset: bad magic");
  le::Reader r(bytes, "dataset");
  r.take(8);
  const auto version = r.u32();
  if (version != kDatasetVersion)
    fail(ErrorCode::version_mismatch, "dataset: unsupported version " + std::to_string(version));
  GridDims dims;
  dims.nx = r.u32();
  dims.ny = r.u32();
  dims.nz = r.u32();
  const auto count = r.u64();
  const auto nv = dims.voxels();
  if (count * (32 + 9 * nv * 4) != r.remaining())
    fail(ErrorCode::truncated, "dataset: payload size does not match the record count");
  std::vector<SampleRecord> records(count);
  for (auto& rec : records) {
    rec.m = r.u32();
    rec.n = r.u32();
    rec.final_iteration = r.u32();
    rec.symmetry = static_cast<Symmetry>(r.u32());
    rec.seed = r.u64();
    r.u64();
    rec.input.dims = dims;
    rec.input.data.resize(kChannelCount * nv);
    r.f32_array(rec.input.data.data(), rec.input.data.size());
    rec.target.resize(nv);
    r.f32_array(rec.target.data(), nv);
    validate_record(rec);
  }
  return records;
}

void write_records(const std::filesystem::path& path, std::span<const SampleRecord> records) {
  require(!records.empty(), "write_records: no records (use encode_records with explicit dims)");
  write_file(path, encode_records(records.front().input.dims, records));
}

std::vector<SampleRecord> read_records(const std::filesystem::path& path) {
  return decode_records(read_file(path));
}

}  // namespace topo3d

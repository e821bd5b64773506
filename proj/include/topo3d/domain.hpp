#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace topo3d {

using Vec3 = std::array<double, 3>;
using NodeCoord = std::array<int, 3>;

// Regular grid of cubic hexahedral elements. Elements and nodes are numbered
// x-fastest, then y, then z; DOF 3*node + axis.
struct DesignDomain {
  int nx = 0, ny = 0, nz = 0;
  double lx = 0, ly = 0, lz = 0;
  double h = 0;

  std::size_t element_count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  std::size_t node_count() const {
    return static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1);
  }
  std::size_t dof_count() const { return 3 * node_count(); }
  double element_volume() const { return h * h * h; }
  double volume() const { return lx * ly * lz; }

  std::size_t node_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nx + 1) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny + 1) * k);
  }
  NodeCoord node_coord(std::size_t node) const;
  std::size_t element_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nx) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k);
  }
  NodeCoord element_coord(std::size_t element) const;

  // Local order: (0,0,0) (1,0,0) (1,1,0) (0,1,0) then the same at +z.
  std::array<std::size_t, 8> element_nodes(std::size_t element) const;

  bool is_surface_element(std::size_t element) const;
  bool operator==(const DesignDomain&) const = default;
};

DesignDomain build_domain(int nx, int ny, int nz, double lx, double ly, double lz);

// 24 x 12 x 12 elements over a 2 m x 1 m x 1 m beam.
DesignDomain reference_domain();

enum class Face : int { x_min = 0, x_max = 1, y_min = 2, y_max = 3, z_min = 4, z_max = 5 };

// Point load anchored on a boundary face. `u` and `v` are fractional
// coordinates along the two axes spanning the face, in ascending axis order.
struct Load {
  Face face = Face::x_max;
  double u = 0.5;
  double v = 0.5;
  Vec3 direction{0.0, 0.0, -1.0};
  double magnitude = 1.0;

  bool operator==(const Load&) const = default;
};

void validate_load(const Load& load);

struct ProblemSpec {
  DesignDomain domain;
  double volume_fraction = 0.3;
  std::vector<Load> loads;
  int bc_case = 1;
  std::uint64_t seed = 0;

  bool operator==(const ProblemSpec&) const = default;
};

inline constexpr double kMinVolumeFraction = 0.07;
inline constexpr double kMaxVolumeFraction = 0.5;
inline constexpr std::size_t kMaxLoads = 10;

void validate_problem(const ProblemSpec& problem);

struct DofMap {
  std::vector<std::size_t> fixed_dofs;  // sorted, unique
  std::vector<std::uint8_t> fixed_mask;  // one flag per DOF
  std::size_t free_dof_count = 0;

  bool is_fixed(std::size_t dof) const { return fixed_mask[dof] != 0; }
  bool is_fixed(std::size_t node, int axis) const { return fixed_mask[3 * node + axis] != 0; }
};

DofMap fixed_dofs_for_case(int bc_case, const DesignDomain& domain);

// Builds a DofMap from an arbitrary fixed set (duplicates allowed).
DofMap make_dof_map(const DesignDomain& domain, std::vector<std::size_t> fixed);

struct NodalForce {
  std::size_t node = 0;
  Vec3 force{};
};

NodeCoord anchor_node(const Load& load, const DesignDomain& domain);

// Equal shares of magnitude * direction over every node within one element
// edge of the snapped anchor, ordered by node index.
std::vector<NodalForce> distribute_load(const Load& load, const DesignDomain& domain);

// Dense 3 * node_count force vector accumulated over all loads.
std::vector<double> assemble_forces(const ProblemSpec& problem);

}  // namespace topo3d

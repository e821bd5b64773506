#include "topo3d/domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topo3d/error.hpp"

namespace topo3d {

NodeCoord DesignDomain::node_coord(std::size_t node) const {
  const auto sx = static_cast<std::size_t>(nx + 1);
  const auto sy = static_cast<std::size_t>(ny + 1);
  return {static_cast<int>(node % sx), static_cast<int>((node / sx) % sy),
          static_cast<int>(node / (sx * sy))};
}

NodeCoord DesignDomain::element_coord(std::size_t element) const {
  const auto sx = static_cast<std::size_t>(nx);
  const auto sy = static_cast<std::size_t>(ny);
  return {static_cast<int>(element % sx), static_cast<int>((element / sx) % sy),
          static_cast<int>(element / (sx * sy))};
}

std::array<std::size_t, 8> DesignDomain::element_nodes(std::size_t element) const {
  const auto [i, j, k] = element_coord(element);
  return {node_index(i, j, k),         node_index(i + 1, j, k),
          node_index(i + 1, j + 1, k), node_index(i, j + 1, k),
          node_index(i, j, k + 1),     node_index(i + 1, j, k + 1),
          node_index(i + 1, j + 1, k + 1), node_index(i, j + 1, k + 1)};
}

bool DesignDomain::is_surface_element(std::size_t element) const {
  const auto [i, j, k] = element_coord(element);
  return i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
}

DesignDomain build_domain(int nx, int ny, int nz, double lx, double ly, double lz) {
  require(nx >= 1 && ny >= 1 && nz >= 1, "domain: element counts must be >= 1");
  require(lx > 0 && ly > 0 && lz > 0, "domain: extents must be positive");
  const double hx = lx / nx, hy = ly / ny, hz = lz / nz;
  if (std::abs(hx - hy) > 1e-9 || std::abs(hx - hz) > 1e-9) {
    fail(ErrorCode::invalid_argument,
         "domain: elements must be cubic, got edge lengths " + std::to_string(hx) + ", " +
             std::to_string(hy) + ", " + std::to_string(hz));
  }
  DesignDomain d;
  d.nx = nx;
  d.ny = ny;
  d.nz = nz;
  d.h = hx;
  d.lx = d.h * nx;
  d.ly = d.h * ny;
  d.lz = d.h * nz;
  return d;
}

DesignDomain reference_domain() { return build_domain(24, 12, 12, 2.0, 1.0, 1.0); }

void validate_load(const Load& load) {
  const auto f = static_cast<int>(load.face);
  require(f >= 0 && f < 6, "load: face index out of range");
  require(load.u >= 0.0 && load.u <= 1.0 && load.v >= 0.0 && load.v <= 1.0,
          "load: in-face coordinates must be fractions in [0, 1]");
  const auto& d = load.direction;
  const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  require(std::abs(norm - 1.0) <= 1e-9, "load: direction must be a unit vector");
  require(load.magnitude == 1.0 || load.magnitude == -1.0, "load: magnitude must be +1 or -1");
}

void validate_problem(const ProblemSpec& problem) {
  require(problem.volume_fraction >= kMinVolumeFraction &&
              problem.volume_fraction <= kMaxVolumeFraction,
          "problem: volume fraction outside [0.07, 0.5]");
  require(!problem.loads.empty() && problem.loads.size() <= kMaxLoads,
          "problem: load count must be in [1, 10]");
  require(problem.bc_case >= 1 && problem.bc_case <= 4, "problem: bc_case must be 1..4");
  for (const auto& load : problem.loads) validate_load(load);
  const auto& d = problem.domain;
  (void)build_domain(d.nx, d.ny, d.nz, d.lx, d.ly, d.lz);
}

DofMap make_dof_map(const DesignDomain& domain, std::vector<std::size_t> fixed) {
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
  DofMap map;
  map.fixed_mask.assign(domain.dof_count(), 0);
  for (auto dof : fixed) {
    require(dof < domain.dof_count(), "dof map: DOF index out of range");
    map.fixed_mask[dof] = 1;
  }
  map.free_dof_count = domain.dof_count() - fixed.size();
  map.fixed_dofs = std::move(fixed);
  return map;
}

namespace {

constexpr std::array<bool, 3> kXYZ{true, true, true};
constexpr std::array<bool, 3> kYZ{false, true, true};
constexpr std::array<bool, 3> kX{true, false, false};

void fix_node(std::vector<std::size_t>& out, std::size_t node, std::array<bool, 3> axes) {
  for (int a = 0; a < 3; ++a)
    if (axes[a]) out.push_back(3 * node + a);
}

void fix_x_plane(std::vector<std::size_t>& out, const DesignDomain& d, int i,
                 std::array<bool, 3> axes) {
  for (int k = 0; k <= d.nz; ++k)
    for (int j = 0; j <= d.ny; ++j) fix_node(out, d.node_index(i, j, k), axes);
}

// Line of nodes along y on the bottom (z = 0) face.
void fix_bottom_line(std::vector<std::size_t>& out, const DesignDomain& d, int i,
                     std::array<bool, 3> axes) {
  for (int j = 0; j <= d.ny; ++j) fix_node(out, d.node_index(i, j, 0), axes);
}

}  // namespace

DofMap fixed_dofs_for_case(int bc_case, const DesignDomain& domain) {
  std::vector<std::size_t> fixed;
  switch (bc_case) {
    case 1:  // cantilever
      fix_x_plane(fixed, domain, 0, kXYZ);
      break;
    case 2:  // simply supported
      fix_bottom_line(fixed, domain, 0, kXYZ);
      fix_bottom_line(fixed, domain, domain.nx, kYZ);
      break;
    case 3: {  // supports moved inward to the quarter points
      const int quarter = static_cast<int>(std::lround(domain.nx / 4.0));
      const int three_quarter = static_cast<int>(std::lround(3.0 * domain.nx / 4.0));
      fix_bottom_line(fixed, domain, quarter, kYZ);
      fix_bottom_line(fixed, domain, three_quarter, kYZ);
      fix_node(fixed, domain.node_index(0, 0, 0), kX);
      break;
    }
    case 4:  // cantilever with the far end held laterally
      fix_x_plane(fixed, domain, 0, kXYZ);
      fix_x_plane(fixed, domain, domain.nx, kYZ);
      break;
    default:
      fail(ErrorCode::invalid_argument,
           "fixed_dofs_for_case: bc_case must be 1..4, got " + std::to_string(bc_case));
  }
  return make_dof_map(domain, std::move(fixed));
}

NodeCoord anchor_node(const Load& load, const DesignDomain& d) {
  auto snap = [](double frac, int n) {
    return std::clamp(static_cast<int>(std::lround(frac * n)), 0, n);
  };
  switch (load.face) {
    case Face::x_min:
      return {0, snap(load.u, d.ny), snap(load.v, d.nz)};
    case Face::x_max:
      return {d.nx, snap(load.u, d.ny), snap(load.v, d.nz)};
    case Face::y_min:
      return {snap(load.u, d.nx), 0, snap(load.v, d.nz)};
    case Face::y_max:
      return {snap(load.u, d.nx), d.ny, snap(load.v, d.nz)};
    case Face::z_min:
      return {snap(load.u, d.nx), snap(load.v, d.ny), 0};
    case Face::z_max:
      return {snap(load.u, d.nx), snap(load.v, d.ny), d.nz};
  }
  fail(ErrorCode::invalid_argument, "anchor_node: bad face");
}

std::vector<NodalForce> distribute_load(const Load& load, const DesignDomain& d) {
  const auto anchor = anchor_node(load, d);
  std::vector<std::size_t> recipients;
  for (int dk = -1; dk <= 1; ++dk) {
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        // Integer offsets: within one edge length means at most one nonzero unit step.
        if (di * di + dj * dj + dk * dk > 1) continue;
        const int i = anchor[0] + di, j = anchor[1] + dj, k = anchor[2] + dk;
        if (i < 0 || j < 0 || k < 0 || i > d.nx || j > d.ny || k > d.nz) continue;
        recipients.push_back(d.node_index(i, j, k));
      }
    }
  }
  std::sort(recipients.begin(), recipients.end());
  const auto count = static_cast<double>(recipients.size());
  Vec3 share;
  for (int a = 0; a < 3; ++a) share[a] = load.magnitude * load.direction[a] / count;
  std::vector<NodalForce> out;
  out.reserve(recipients.size());
  for (auto node : recipients) out.push_back({node, share});
  return out;
}

std::vector<double> assemble_forces(const ProblemSpec& problem) {
  std::vector<double> f(problem.domain.dof_count(), 0.0);
  for (const auto& load : problem.loads) {
    for (const auto& nf : distribute_load(load, problem.domain)) {
      for (int a = 0; a < 3; ++a) f[3 * nf.node + a] += nf.force[a];
    }
  }
  return f;
}

}  // namespace topo3d

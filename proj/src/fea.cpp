#include "topo3d/fea.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace topo3d {

void validate_material(const MaterialModel& m) {
  require(m.e0 > 0.0, "material: e0 must be positive");
  require(m.e_min > 0.0 && m.e_min < m.e0, "material: need 0 < e_min < e0");
  require(m.penal >= 1.0, "material: penalization must be >= 1");
  require(m.nu >= 0.0 && m.nu < 0.5, "material: Poisson ratio must be in [0, 0.5)");
}

namespace {

constexpr std::array<double, 8> kXi{-1, 1, 1, -1, -1, 1, 1, -1};
constexpr std::array<double, 8> kEta{-1, -1, 1, 1, -1, -1, 1, 1};
constexpr std::array<double, 8> kZeta{-1, -1, -1, -1, 1, 1, 1, 1};

}  // namespace

ElementStiffness element_stiffness(const MaterialModel& material, double h) {
  validate_material(material);
  require(h > 0.0, "element_stiffness: edge length must be positive");
  const double nu = material.nu;
  const double lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = 1.0 / (2.0 * (1.0 + nu));

  // Voigt order xx, yy, zz, yz, xz, xy.
  Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
  D.topLeftCorner<3, 3>().setConstant(lambda);
  D.topLeftCorner<3, 3>().diagonal().array() += 2.0 * mu;
  D.bottomRightCorner<3, 3>().diagonal().setConstant(mu);

  const double g = 1.0 / std::sqrt(3.0);
  const double jac = h / 2.0;  // d(x)/d(xi), same on every axis
  const double det_j = jac * jac * jac;

  ElementStiffness ke = ElementStiffness::Zero();
  for (double zeta : {-g, g}) {
    for (double eta : {-g, g}) {
      for (double xi : {-g, g}) {
        Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
        for (int a = 0; a < 8; ++a) {
          const double dx = kXi[a] * (1 + kEta[a] * eta) * (1 + kZeta[a] * zeta) / 8.0 / jac;
          const double dy = kEta[a] * (1 + kXi[a] * xi) * (1 + kZeta[a] * zeta) / 8.0 / jac;
          const double dz = kZeta[a] * (1 + kXi[a] * xi) * (1 + kEta[a] * eta) / 8.0 / jac;
          const int c = 3 * a;
          B(0, c) = dx;
          B(1, c + 1) = dy;
          B(2, c + 2) = dz;
          B(3, c + 1) = dz;
          B(3, c + 2) = dy;
          B(4, c) = dz;
          B(4, c + 2) = dx;
          B(5, c) = dy;
          B(5, c + 1) = dx;
        }
        ke.noalias() += B.transpose() * D * B * det_j;
      }
    }
  }
  // Quadrature sums are symmetric only up to rounding; make it exact.
  return 0.5 * (ke + ke.transpose());
}

double simp_modulus(double density, const MaterialModel& m) {
  require(density >= 0.0 && density <= 1.0, "simp_modulus: density outside [0, 1]");
  return m.e_min + (m.e0 - m.e_min) * std::pow(density, m.penal);
}

StiffnessOperator::StiffnessOperator(const DesignDomain& domain, const MaterialModel& material)
    : domain_(domain), material_(material), k0_(element_stiffness(material, domain.h)) {
  const auto ne = domain.element_count();
  element_dofs_.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto nodes = domain.element_nodes(e);
    for (int a = 0; a < 8; ++a)
      for (int c = 0; c < 3; ++c) element_dofs_[e][3 * a + c] = 3 * nodes[a] + c;
  }
  moduli_.assign(ne, material.e0);
  local_u_.resize(24, static_cast<Eigen::Index>(ne));
  local_f_.resize(24, static_cast<Eigen::Index>(ne));
}

void StiffnessOperator::set_densities(std::span<const double> densities) {
  require(densities.size() == moduli_.size(), "stiffness: density count mismatch",
          ErrorCode::shape_mismatch);
  for (std::size_t e = 0; e < moduli_.size(); ++e)
    moduli_[e] = simp_modulus(densities[e], material_);
}

void StiffnessOperator::gather(std::span<const double> u, const DofMap* dofs) const {
  require(u.size() == domain_.dof_count(), "stiffness: vector length mismatch",
          ErrorCode::shape_mismatch);
  const auto ne = element_dofs_.size();
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& ed = element_dofs_[e];
    double* col = local_u_.col(static_cast<Eigen::Index>(e)).data();
    if (dofs) {
      for (int l = 0; l < 24; ++l) col[l] = dofs->fixed_mask[ed[l]] ? 0.0 : u[ed[l]];
    } else {
      for (int l = 0; l < 24; ++l) col[l] = u[ed[l]];
    }
  }
}

void StiffnessOperator::scatter(std::span<double> y, const DofMap* dofs) const {
  require(y.size() == domain_.dof_count(), "stiffness: vector length mismatch",
          ErrorCode::shape_mismatch);
  std::fill(y.begin(), y.end(), 0.0);
  // Fixed element order keeps the accumulation bit-reproducible.
  const auto ne = element_dofs_.size();
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& ed = element_dofs_[e];
    const double* col = local_f_.col(static_cast<Eigen::Index>(e)).data();
    const double scale = moduli_[e];
    for (int l = 0; l < 24; ++l) y[ed[l]] += scale * col[l];
  }
  if (dofs) {
    for (auto dof : dofs->fixed_dofs) y[dof] = 0.0;
  }
}

void StiffnessOperator::apply_full(std::span<const double> u, std::span<double> y) const {
  gather(u, nullptr);
  local_f_.noalias() = k0_ * local_u_;
  scatter(y, nullptr);
}

void StiffnessOperator::apply(std::span<const double> u, std::span<double> y,
                              const DofMap& dofs) const {
  gather(u, &dofs);
  local_f_.noalias() = k0_ * local_u_;
  scatter(y, &dofs);
}

std::vector<double> StiffnessOperator::diagonal() const {
  std::vector<double> diag(domain_.dof_count(), 0.0);
  for (std::size_t e = 0; e < element_dofs_.size(); ++e) {
    for (int l = 0; l < 24; ++l) diag[element_dofs_[e][l]] += moduli_[e] * k0_(l, l);
  }
  return diag;
}

std::vector<double> StiffnessOperator::element_energies(std::span<const double> u) const {
  gather(u, nullptr);
  local_f_.noalias() = k0_ * local_u_;
  std::vector<double> energies(element_dofs_.size());
  for (std::size_t e = 0; e < energies.size(); ++e) {
    const auto idx = static_cast<Eigen::Index>(e);
    energies[e] = local_u_.col(idx).dot(local_f_.col(idx));
  }
  return energies;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> solve_equilibrium(const StiffnessOperator& K, std::span<const double> forces,
                                      const DofMap& dofs, const SolveOptions& options,
                                      SolveStats* stats, std::span<const double> initial_guess) {
  const auto n = K.domain().dof_count();
  require(forces.size() == n, "solve: force vector length mismatch", ErrorCode::shape_mismatch);
  require(options.tol > 0.0, "solve: tolerance must be positive");

  std::vector<double> f(forces.begin(), forces.end());
  for (double v : f) require(std::isfinite(v), "solve: non-finite force", ErrorCode::non_finite);
  for (auto dof : dofs.fixed_dofs) f[dof] = 0.0;

  std::vector<double> u(n, 0.0);
  SolveStats local;
  SolveStats& st = stats ? *stats : local;
  st = SolveStats{};

  const double f_norm = std::sqrt(dot(f, f));
  if (f_norm == 0.0) return u;

  if (!initial_guess.empty()) {
    require(initial_guess.size() == n, "solve: initial guess length mismatch",
            ErrorCode::shape_mismatch);
    for (std::size_t i = 0; i < n; ++i) u[i] = dofs.fixed_mask[i] ? 0.0 : initial_guess[i];
  }

  std::vector<double> inv_diag = K.diagonal();
  for (std::size_t i = 0; i < n; ++i)
    inv_diag[i] = (dofs.fixed_mask[i] || inv_diag[i] <= 0.0) ? 0.0 : 1.0 / inv_diag[i];

  std::vector<double> r(n), z(n), p(n), q(n);
  auto true_residual = [&] {
    K.apply(u, q, dofs);
    for (std::size_t i = 0; i < n; ++i) r[i] = f[i] - q[i];
  };
  true_residual();

  const std::size_t cap =
      options.max_iterations ? options.max_iterations : 10 * std::max<std::size_t>(dofs.free_dof_count, 1);
  double rel = std::sqrt(dot(r, r)) / f_norm;
  // Kept regardless of record_history: a failure reports it.
  std::vector<double> history{rel};

  bool restart = true;
  double rz = 0.0;
  std::size_t it = 0;
  while (true) {
    if (rel <= options.tol) {
      // Recursive residual drifts from the true one; confirm before accepting.
      true_residual();
      rel = std::sqrt(dot(r, r)) / f_norm;
      if (rel <= options.tol) break;
      restart = true;
    }
    if (it >= cap) {
      throw SolveError("solve: PCG did not converge in " + std::to_string(cap) +
                           " iterations, relative residual " + std::to_string(rel),
                       std::move(history));
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot(r, z);
    if (restart) {
      p = z;
      restart = false;
    } else {
      const double beta = rz_new / rz;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    rz = rz_new;
    K.apply(p, q, dofs);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) {
      throw SolveError("solve: operator not positive definite on the free DOFs",
                       std::move(history));
    }
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    ++it;
    rel = std::sqrt(dot(r, r)) / f_norm;
    history.push_back(rel);
  }
  if (options.record_history) st.residual_history = std::move(history);
  st.iterations = it;
  st.relative_residual = rel;
  return u;
}

std::vector<double> solve_equilibrium(const DesignDomain& domain, const MaterialModel& material,
                                      std::span<const double> densities,
                                      std::span<const double> forces, const DofMap& dofs,
                                      double tol) {
  StiffnessOperator K(domain, material);
  K.set_densities(densities);
  SolveOptions options;
  options.tol = tol;
  return solve_equilibrium(K, forces, dofs, options);
}

ComplianceResult compliance_and_sensitivity(const StiffnessOperator& K,
                                            std::span<const double> u,
                                            std::span<const double> densities) {
  const auto& m = K.material();
  const auto energies = K.element_energies(u);
  require(densities.size() == energies.size(), "compliance: density count mismatch",
          ErrorCode::shape_mismatch);
  ComplianceResult out;
  out.sensitivity.resize(energies.size());
  double c = 0.0;
  for (std::size_t e = 0; e < energies.size(); ++e) {
    const double x = densities[e];
    c += simp_modulus(x, m) * energies[e];
    out.sensitivity[e] = -m.penal * std::pow(x, m.penal - 1.0) * (m.e0 - m.e_min) * energies[e];
  }
  out.compliance = c;
  return out;
}

}  // namespace topo3d

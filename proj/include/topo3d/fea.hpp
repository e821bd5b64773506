#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "topo3d/domain.hpp"
#include "topo3d/error.hpp"

namespace topo3d {

struct MaterialModel {
  double e0 = 1.0;
  double e_min = 1e-9;
  double penal = 3.0;
  double nu = 0.3;
};

void validate_material(const MaterialModel& material);

using ElementStiffness = Eigen::Matrix<double, 24, 24>;

// Trilinear 8-node hexahedron of edge h at unit Young's modulus, 2x2x2 Gauss
// quadrature. DOF order: node-major (node 0 x,y,z, node 1 x,y,z, ...).
ElementStiffness element_stiffness(const MaterialModel& material, double h);

// Modified SIMP: e_min + (e0 - e_min) * density^p.
double simp_modulus(double density, const MaterialModel& material);

// Matrix-free global stiffness K(x~) = sum_e E(x~_e) P_e^T K0 P_e.
class StiffnessOperator {
 public:
  StiffnessOperator(const DesignDomain& domain, const MaterialModel& material);

  // Filtered densities, one per element.
  void set_densities(std::span<const double> densities);

  const DesignDomain& domain() const { return domain_; }
  const MaterialModel& material() const { return material_; }
  const ElementStiffness& element_matrix() const { return k0_; }
  std::span<const double> moduli() const { return moduli_; }

  // y = K u over all DOFs, no constraints applied.
  void apply_full(std::span<const double> u, std::span<double> y) const;

  // y = K u restricted to free DOFs: input entries at fixed DOFs are treated
  // as zero and output entries at fixed DOFs are zero.
  void apply(std::span<const double> u, std::span<double> y, const DofMap& dofs) const;

  std::vector<double> diagonal() const;

  // u_e^T K0 u_e per element (unit modulus strain energy times two).
  std::vector<double> element_energies(std::span<const double> u) const;

 private:
  void gather(std::span<const double> u, const DofMap* dofs) const;
  void scatter(std::span<double> y, const DofMap* dofs) const;

  DesignDomain domain_;
  MaterialModel material_;
  ElementStiffness k0_;
  std::vector<std::array<std::size_t, 24>> element_dofs_;
  std::vector<double> moduli_;
  mutable Eigen::Matrix<double, 24, Eigen::Dynamic> local_u_;
  mutable Eigen::Matrix<double, 24, Eigen::Dynamic> local_f_;
};

struct SolveStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> residual_history;
};

class SolveError : public Error {
 public:
  SolveError(const std::string& message, std::vector<double> history)
      : Error(ErrorCode::not_converged, message), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

struct SolveOptions {
  double tol = 1e-8;
  std::size_t max_iterations = 0;  // 0: 10 * free DOF count
  bool record_history = false;
};

// Jacobi-preconditioned CG on the free DOFs. `initial_guess`, when non-empty,
// seeds the iteration. Returns u with exact zeros at fixed DOFs.
std::vector<double> solve_equilibrium(const StiffnessOperator& stiffness,
                                      std::span<const double> forces, const DofMap& dofs,
                                      const SolveOptions& options = {},
                                      SolveStats* stats = nullptr,
                                      std::span<const double> initial_guess = {});

std::vector<double> solve_equilibrium(const DesignDomain& domain, const MaterialModel& material,
                                      std::span<const double> densities,
                                      std::span<const double> forces, const DofMap& dofs,
                                      double tol = 1e-8);

struct ComplianceResult {
  double compliance = 0.0;
  std::vector<double> sensitivity;  // dc/dx~ per element
};

ComplianceResult compliance_and_sensitivity(const StiffnessOperator& stiffness,
                                            std::span<const double> u,
                                            std::span<const double> densities);

}  // namespace topo3d

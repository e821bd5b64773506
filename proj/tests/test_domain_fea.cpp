#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "topo3d/fea.hpp"
#include "topo3d/rng.hpp"

using namespace topo3d;

namespace {

std::vector<bool> fixed_flags(const DofMap& d) { return {d.fixed_mask.begin(), d.fixed_mask.end()}; }

double rel_l2(const std::vector<double>& a, const Eigen::VectorXd& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b(static_cast<Eigen::Index>(i))) * (a[i] - b(static_cast<Eigen::Index>(i)));
    den += b(static_cast<Eigen::Index>(i)) * b(static_cast<Eigen::Index>(i));
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("reference domain counts") {
  const auto d = build_domain(24, 12, 12, 2, 1, 1);
  CHECK(d.element_count() == 3456);
  CHECK(d.h == doctest::Approx(1.0 / 12.0));
  CHECK(d == reference_domain());
  CHECK(build_domain(1, 1, 1, 1, 1, 1).node_count() == 8);
  CHECK(build_domain(2, 1, 1, 2, 1, 1).node_count() == 12);
}

TEST_CASE("non-cubic elements are rejected") {
  CHECK_THROWS_AS(build_domain(24, 12, 12, 2, 1, 1.5), Error);
  CHECK_THROWS_AS(build_domain(0, 1, 1, 0, 1, 1), Error);
}

TEST_CASE("element coordinates round-trip and node order") {
  const auto d = build_domain(3, 2, 2, 3, 2, 2);
  for (std::size_t e = 0; e < d.element_count(); ++e) {
    const auto c = d.element_coord(e);
    CHECK(d.element_index(c[0], c[1], c[2]) == e);
    const auto nodes = d.element_nodes(e);
    CHECK(nodes == oracle::element_nodes(d, c[0], c[1], c[2]));
  }
}

TEST_CASE("constraint cases") {
  const auto d = reference_domain();
  const auto c1 = fixed_dofs_for_case(1, d);
  CHECK(c1.fixed_dofs.size() == 507);
  CHECK(c1.free_dof_count == d.dof_count() - 507);
  CHECK(fixed_dofs_for_case(1, build_domain(1, 1, 1, 1, 1, 1)).fixed_dofs.size() == 12);
  CHECK_THROWS_AS(fixed_dofs_for_case(5, d), Error);
  CHECK_THROWS_AS(fixed_dofs_for_case(0, d), Error);
  for (int c = 1; c <= 4; ++c) {
    const auto a = fixed_dofs_for_case(c, d), b = fixed_dofs_for_case(c, d);
    CHECK(a.fixed_dofs == b.fixed_dofs);
    CHECK(std::is_sorted(a.fixed_dofs.begin(), a.fixed_dofs.end()));
  }
  // Case 2: 13 nodes pinned in xyz at x=0 bottom, 13 in yz at x=lx bottom.
  CHECK(fixed_dofs_for_case(2, d).fixed_dofs.size() == 13 * 3 + 13 * 2);
  // Case 3: two bottom lines in yz plus one x pin.
  CHECK(fixed_dofs_for_case(3, d).fixed_dofs.size() == 2 * 13 * 2 + 1);
  // Case 4: both end faces.
  CHECK(fixed_dofs_for_case(4, d).fixed_dofs.size() == 169 * 3 + 169 * 2);
}

TEST_CASE("every constraint case removes rigid-body modes") {
  const auto d = build_domain(4, 2, 2, 2, 1, 1);
  const std::vector<double> ones(d.element_count(), 1.0);
  Rng rng(11);
  for (int c = 1; c <= 4; ++c) {
    const auto dofs = fixed_dofs_for_case(c, d);
    std::vector<double> f(d.dof_count());
    for (auto& v : f) v = rng.uniform(-1, 1);
    for (auto i : dofs.fixed_dofs) f[i] = 0;
    // Smallest eigenvalue of the constrained dense matrix must be positive.
    const auto K = oracle::dense_stiffness(d, ones);
    std::vector<Eigen::Index> free;
    for (std::size_t i = 0; i < d.dof_count(); ++i)
      if (!dofs.is_fixed(i)) free.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd Kff(free.size(), free.size());
    for (std::size_t a = 0; a < free.size(); ++a)
      for (std::size_t b = 0; b < free.size(); ++b) Kff(a, b) = K(free[a], free[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Kff);
    CHECK(eig.eigenvalues().minCoeff() > 1e-6);
    CHECK_NOTHROW(solve_equilibrium(d, MaterialModel{}, ones, f, dofs));
  }
}

TEST_CASE("load distribution conserves force and matches a brute-force scan") {
  const auto d = reference_domain();
  Load centre{Face::x_max, 0.5, 0.5, {0.0, 0.6, -0.8}, -1.0};
  Load corner{Face::x_max, 0.0, 0.0, {1.0, 0.0, 0.0}, 1.0};
  for (const auto& load : {centre, corner}) {
    const auto shares = distribute_load(load, d);
    double sum[3] = {0, 0, 0};
    for (const auto& s : shares)
      for (int a = 0; a < 3; ++a) sum[a] += s.force[a];
    for (int a = 0; a < 3; ++a) CHECK(sum[a] == doctest::Approx(load.magnitude * load.direction[a]).epsilon(1e-12));
    const auto anchor = anchor_node(load, d);
    std::set<std::size_t> expect;
    for (int k = 0; k <= d.nz; ++k)
      for (int j = 0; j <= d.ny; ++j)
        for (int i = 0; i <= d.nx; ++i) {
          const double dist = d.h * std::sqrt(double((i - anchor[0]) * (i - anchor[0]) +
                                                     (j - anchor[1]) * (j - anchor[1]) +
                                                     (k - anchor[2]) * (k - anchor[2])));
          if (dist <= d.h * (1 + 1e-9)) expect.insert(d.node_index(i, j, k));
        }
    std::set<std::size_t> got;
    for (const auto& s : shares) got.insert(s.node);
    CHECK(got == expect);
  }
  // Corner anchor: itself plus 3 axis neighbours inside the domain.
  CHECK(distribute_load(corner, d).size() == 4);
  CHECK(distribute_load(centre, d).size() == 6);
}

TEST_CASE("load translation permutes recipients consistently") {
  const auto d = reference_domain();
  Load a{Face::z_max, 0.25, 0.25, {0, 0, 1}, 1.0};
  Load b = a;
  b.u += 1.0 / d.nx;  // one element along x
  const auto sa = distribute_load(a, d), sb = distribute_load(b, d);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sb[i].node == sa[i].node + 1);
}

TEST_CASE("element stiffness matches the independent quadrature oracle") {
  MaterialModel m;
  const auto K = element_stiffness(m, 1.0);
  const auto R = oracle::hex8_stiffness(0.3, 1.0);
  CHECK((K - R).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::Matrix<double, 24, 1> tx;
  for (int i = 0; i < 24; ++i) tx(i) = i % 3 == 0 ? 1.0 : 0.0;
  CHECK((K * tx).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(K.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10 * 3);  // three translations summed
  Eigen::SelfAdjointEigenSolver<ElementStiffness> eig(K);
  int zeros = 0;
  for (int i = 0; i < 24; ++i) {
    if (std::abs(eig.eigenvalues()(i)) < 1e-8) ++zeros;
    else CHECK(eig.eigenvalues()(i) > 0);
  }
  CHECK(zeros == 6);
  const auto Kh = element_stiffness(m, 0.25);
  CHECK((Kh - oracle::hex8_stiffness(0.3, 0.25)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("modified SIMP interpolation") {
  MaterialModel m;
  CHECK(simp_modulus(1.0, m) == 1.0);
  CHECK(simp_modulus(0.0, m) == 1e-9);
  CHECK(simp_modulus(0.5, m) == doctest::Approx(0.125));
  CHECK_THROWS_AS(simp_modulus(1.1, m), Error);
  CHECK_THROWS_AS(simp_modulus(-0.1, m), Error);
  double prev = 0;
  for (int i = 0; i <= 10; ++i) {
    const double e = simp_modulus(i / 10.0, m);
    CHECK(e > prev);
    prev = e;
  }
}

TEST_CASE("matrix-free apply equals dense multiply") {
  Rng rng(3);
  for (int nx = 1; nx <= 3; ++nx)
    for (int ny = 1; ny <= 3; ++ny) {
      const auto d = build_domain(nx, ny, 2, nx, ny, 2);
      std::vector<double> x(d.element_count());
      for (auto& v : x) v = rng.uniform(0, 1);
      StiffnessOperator K(d, MaterialModel{});
      K.set_densities(x);
      std::vector<double> u(d.dof_count()), y(d.dof_count());
      for (auto& v : u) v = rng.uniform(-1, 1);
      K.apply_full(u, y);
      const auto Kd = oracle::dense_stiffness(d, x);
      const Eigen::VectorXd ref = Kd * Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
      double worst = 0;
      for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - ref(static_cast<Eigen::Index>(i))));
      CHECK(worst <= 1e-10);
      const auto diag = K.diagonal();
      for (std::size_t i = 0; i < diag.size(); ++i)
        CHECK(diag[i] == doctest::Approx(Kd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))).epsilon(1e-12));
    }
}

TEST_CASE("PCG solves the 2x1x1 cantilever like a dense direct solve") {
  const auto d = build_domain(2, 1, 1, 2, 1, 1);
  ProblemSpec p;
  p.domain = d;
  p.loads = {Load{Face::x_max, 0.0, 0.0, {0, 0, -1}, 1.0}};
  const auto dofs = fixed_dofs_for_case(1, d);
  const auto f = assemble_forces(p);
  const std::vector<double> ones(d.element_count(), 1.0);
  const auto u = solve_equilibrium(d, MaterialModel{}, ones, f, dofs);
  const auto ref = oracle::dense_solve(oracle::dense_stiffness(d, ones), f, fixed_flags(dofs));
  CHECK(rel_l2(u, ref) < 1e-8);
  for (auto i : dofs.fixed_dofs) CHECK(u[i] == 0.0);
}

TEST_CASE("zero force gives exactly zero displacement") {
  const auto d = build_domain(2, 2, 2, 2, 2, 2);
  const std::vector<double> f(d.dof_count(), 0.0), x(d.element_count(), 0.4);
  SolveStats stats;
  StiffnessOperator K(d, MaterialModel{});
  K.set_densities(x);
  const auto u = solve_equilibrium(K, f, fixed_dofs_for_case(1, d), {}, &stats);
  CHECK(std::all_of(u.begin(), u.end(), [](double v) { return v == 0.0; }));
  CHECK(stats.iterations == 0);
}

TEST_CASE("PCG non-convergence carries the residual history") {
  const auto d = build_domain(3, 2, 2, 3, 2, 2);
  ProblemSpec p;
  p.domain = d;
  p.loads = {Load{Face::x_max, 0.5, 0.5, {0, 0, -1}, 1.0}};
  StiffnessOperator K(d, MaterialModel{});
  K.set_densities(std::vector<double>(d.element_count(), 1.0));
  SolveOptions o;
  o.max_iterations = 2;
  o.tol = 1e-14;
  try {
    solve_equilibrium(K, assemble_forces(p), fixed_dofs_for_case(1, d), o);
    FAIL("expected SolveError");
  } catch (const SolveError& e) {
    CHECK(e.code() == ErrorCode::not_converged);
    CHECK(e.residual_history.size() >= 2);
  }
}

TEST_CASE("residual contract on the full-size grid") {
  const auto d = reference_domain();
  ProblemSpec p;
  p.domain = d;
  p.loads = {Load{Face::x_max, 0.5, 0.0, {0, 0, -1}, 1.0}};
  const auto dofs = fixed_dofs_for_case(1, d);
  const auto f = assemble_forces(p);
  StiffnessOperator K(d, MaterialModel{});
  K.set_densities(std::vector<double>(d.element_count(), 0.3));
  SolveStats stats;
  const auto u = solve_equilibrium(K, f, dofs, {}, &stats);
  std::vector<double> r(f.size());
  K.apply(u, r, dofs);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!dofs.is_fixed(i)) {
      num += (r[i] - f[i]) * (r[i] - f[i]);
      den += f[i] * f[i];
    }
  CHECK(std::sqrt(num / den) <= 1e-8);
  CHECK(stats.iterations > 0);
}

TEST_CASE("compliance equals f.u and matches a hand-assembled single element") {
  const auto d = build_domain(1, 1, 1, 1, 1, 1);
  ProblemSpec p;
  p.domain = d;
  // Tension: pull the x=1 face along +x.
  p.loads = {Load{Face::x_max, 0.0, 0.0, {1, 0, 0}, 1.0}};
  const auto dofs = fixed_dofs_for_case(1, d);
  const auto f = assemble_forces(p);
  const std::vector<double> x{0.7};
  StiffnessOperator K(d, MaterialModel{});
  K.set_densities(x);
  const auto u = solve_equilibrium(K, f, dofs, SolveOptions{1e-12});
  const auto r = compliance_and_sensitivity(K, u, x);
  double fu = 0;
  for (std::size_t i = 0; i < f.size(); ++i) fu += f[i] * u[i];
  CHECK(r.compliance == doctest::Approx(fu).epsilon(1e-8));
  const auto Kd = oracle::dense_stiffness(d, x);
  const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(u.size()));
  CHECK(r.compliance == doctest::Approx(uv.dot(Kd * uv)).epsilon(1e-10));
  CHECK(r.sensitivity[0] <= 0.0);
}

TEST_CASE("sensitivity matches central differences with re-solve") {
  const auto d = build_domain(2, 2, 2, 2, 2, 2);
  ProblemSpec p;
  p.domain = d;
  p.loads = {Load{Face::x_max, 0.5, 1.0, {0, 0.3, -1}, 1.0}};
  const auto dofs = fixed_dofs_for_case(1, d);
  const auto f = assemble_forces(p);
  Rng rng(5);
  std::vector<double> x(d.element_count());
  for (auto& v : x) v = rng.uniform(0.3, 0.9);
  auto compliance = [&](const std::vector<double>& xs) {
    StiffnessOperator K(d, MaterialModel{});
    K.set_densities(xs);
    const auto u = solve_equilibrium(K, f, dofs, SolveOptions{1e-13});
    return compliance_and_sensitivity(K, u, xs);
  };
  const auto base = compliance(x);
  const double step = 1e-5;
  for (std::size_t e = 0; e < x.size(); ++e) {
    auto xp = x, xm = x;
    xp[e] += step;
    xm[e] -= step;
    const double fd = (compliance(xp).compliance - compliance(xm).compliance) / (2 * step);
    CHECK(std::abs(base.sensitivity[e] - fd) / std::abs(fd) < 1e-4);
  }
}

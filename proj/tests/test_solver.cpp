#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "tfwlab/rng.hpp"
#include "tfwlab/solver.hpp"

using namespace tfw;

namespace {

ChargeDistribution homogeneous_m(int dim, double c0, int n = 16, int L = 2) {
  EnsembleSpec spec;
  spec.lattice.dim = dim;
  spec.background = c0;
  PeriodicSample s = sample_periodic(spec, L, 0);
  return realize_charges(s, make_grid(s, n));
}

EnsembleSpec two_species_spec(int dim) {
  EnsembleSpec spec;
  spec.lattice.dim = dim;
  spec.species.entries = {{1.0, 0.5}, {2.0, 0.5}};
  spec.sigma = 0.25;
  spec.rho_sep = 0.25;
  return spec;
}

ChargeDistribution random_m(int dim, int L, int n, std::uint64_t seed) {
  EnsembleSpec spec = two_species_spec(dim);
  PeriodicSample s = sample_periodic(spec, L, seed);
  return realize_charges(s, make_grid(s, n));
}

}  // namespace

TEST_CASE("homogeneous density: constant solution, theta = -(5/3) c0^(2/3)") {
  ChargeDistribution m = homogeneous_m(3, 1.0);
  TFWSolution sol = solve_tfw(m);
  CHECK(sol.converged);
  CHECK(sol.iterations == 0);  // the uniform init is already stationary
  double err = 0.0;
  for (double v : sol.u.values) err = std::max(err, std::abs(v - 1.0));
  CHECK(err <= 1e-8);
  CHECK(sol.theta == doctest::Approx(-5.0 / 3.0).epsilon(1e-10));
  CHECK(sol.residual <= 1e-8);
  CHECK(linf_norm(sol.phi) <= 1e-10);
}

TEST_CASE("homogeneous scaling: c0 = 8 gives u = sqrt(8), theta = -20/3") {
  ChargeDistribution m = homogeneous_m(2, 8.0);
  TFWSolution sol = solve_tfw(m);
  CHECK(sol.converged);
  double err = 0.0;
  for (double v : sol.u.values) err = std::max(err, std::abs(v - std::sqrt(8.0)));
  CHECK(err <= 1e-8);
  CHECK(sol.theta == doctest::Approx(-20.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("homogeneous_reference agrees with the solver") {
  ChargeDistribution m = homogeneous_m(2, 3.7);
  TFWSolution ref = homogeneous_reference(m.grid, 3.7);
  TFWSolution sol = solve_tfw(m);
  double err = 0.0;
  for (std::size_t i = 0; i < sol.u.size(); ++i)
    err = std::max(err, std::abs(sol.u[i] - ref.u[i]));
  CHECK(err <= 1e-8);
  CHECK(sol.theta == doctest::Approx(ref.theta).epsilon(1e-8));
  CHECK(ref.theta == doctest::Approx(-(5.0 / 3.0) * std::cbrt(3.7 * 3.7)));
  CHECK_THROWS_AS(homogeneous_reference(m.grid, 0.0), InvalidInput);
}

TEST_CASE("degenerate and invalid charge inputs are rejected") {
  EnsembleSpec spec;
  spec.lattice.dim = 2;
  spec.background = 1.0;
  PeriodicSample s = sample_periodic(spec, 2, 0);
  ChargeDistribution m = realize_charges(s, make_grid(s, 16));
  for (double& v : m.density.values) v = 0.0;
  CHECK_THROWS_AS(solve_tfw(m), InvalidInput);  // m == 0 has no ground state
  for (double& v : m.density.values) v = -1.0;
  CHECK_THROWS_AS(solve_tfw(m), InvalidInput);
}

TEST_CASE("random two-species sample: convergence, neutrality, positivity") {
  ChargeDistribution m = random_m(2, 4, 32, 3);
  TFWSolution sol = solve_tfw(m);
  CHECK(sol.converged);
  CHECK(sol.residual <= 1e-8);
  // neutrality int u^2 = int m to 1e-10 relative
  ScalarField u2(sol.u.grid);
  for (std::size_t i = 0; i < u2.size(); ++i) u2[i] = sol.u[i] * sol.u[i];
  CHECK(integrate(u2) == doctest::Approx(m.total_mass()).epsilon(1e-10));
  // gauge: mean phi = 0
  CHECK(std::abs(integrate(sol.phi)) <= 1e-10 * linf_norm(sol.phi));
  // positivity
  CHECK(field_min(sol.u) > 0.0);
  CHECK(field_min(sol.u) >= 1e-6 * field_max(sol.u));
}

TEST_CASE("energy decreases monotonically along accepted steps") {
  ChargeDistribution m = random_m(2, 4, 32, 8);
  SolverConfig cfg;
  cfg.keep_log = true;
  TFWSolution sol = solve_tfw(m, cfg);
  REQUIRE(sol.log.size() >= 2);
  // non-increasing up to the roundoff allowance of the line search
  for (std::size_t i = 1; i < sol.log.size(); ++i)
    CHECK(sol.log[i].energy <=
          sol.log[i - 1].energy + 1e-12 * (1.0 + std::abs(sol.log[i].energy)));
}

TEST_CASE("uniqueness probe: distinct initializations reach the same state") {
  ChargeDistribution m = random_m(2, 4, 32, 21);
  SolverConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 4000;
  TFWSolution a = solve_tfw(m, cfg);
  cfg.init = InitStrategy::perturbed;
  cfg.perturb_seed = 77;
  TFWSolution b = solve_tfw(m, cfg);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  double err = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i)
    err = std::max(err, std::abs(a.u[i] - b.u[i]));
  CHECK(err <= 10.0 * cfg.tol);
}

TEST_CASE("non-convergence within max_iter returns diagnostics") {
  ChargeDistribution m = random_m(2, 4, 32, 5);
  SolverConfig cfg;
  cfg.max_iter = 1;
  cfg.tol = 1e-14;
  TFWSolution sol = solve_tfw(m, cfg);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 1);
  CHECK(sol.residual > 0.0);
}

TEST_CASE("grid refinement: single-nucleus energy is resolution-stable") {
  EnsembleSpec spec = two_species_spec(3);
  spec.species.entries = {{1.0, 1.0}};
  spec.background = 0.5;  // neutralizing sea keeps contrasts moderate
  PeriodicSample s = sample_from_occupancy(spec, 2, std::vector<int>(8, 0));
  // fixed physical smearing sigma = 4h of the coarse grid
  spec.sigma = 4.0 * 2.0 / 32.0;
  s.spec = spec;
  double energy[2];
  int idx = 0;
  for (int n : {32, 64}) {
    ChargeDistribution m = realize_charges(s, make_grid(s, n));
    TFWSolution sol = solve_tfw(m);
    REQUIRE(sol.converged);
    energy[idx++] = sol.energy;
  }
  CHECK(std::abs(energy[0] - energy[1]) <=
        1e-4 * std::abs(energy[1]));
}

TEST_CASE("el_residual: homogeneous state has vanishing residuals") {
  ChargeDistribution m = homogeneous_m(2, 2.0);
  TFWSolution sol = solve_tfw(m);
  ElResidual r = el_residual(sol, m);
  CHECK(r.residual_u <= 1e-10);
  CHECK(r.residual_phi <= 1e-10);
}

TEST_CASE("el_residual: phi = 0 gives the norm of the Poisson mismatch") {
  ChargeDistribution m = random_m(2, 4, 32, 13);
  TFWSolution sol = solve_tfw(m);
  TFWSolution broken = sol;
  broken.phi = ScalarField(sol.phi.grid, 0.0);
  ElResidual r = el_residual(broken, m);
  ScalarField rhs(m.grid);
  for (std::size_t i = 0; i < rhs.size(); ++i)
    rhs[i] = 4.0 * M_PI * (m.density[i] - sol.u[i] * sol.u[i]);
  CHECK(r.residual_phi == doctest::Approx(l2_norm(rhs)).epsilon(1e-12));
}

TEST_CASE("el_residual grows linearly in the perturbation amplitude") {
  ChargeDistribution m = homogeneous_m(2, 1.0, 32);
  const GridSpec& g = m.grid;
  ScalarField mode(g);
  for (std::size_t i = 0; i < mode.size(); ++i)
    mode[i] = std::sin(2.0 * M_PI * g.coord(i)[0] / g.cell(0, 0));
  double residuals[2];
  int idx = 0;
  for (double eps : {1e-3, 1e-4}) {
    ScalarField u(g, 1.0);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += eps * mode[i];
    TFWSolution state = make_state(u, m);
    residuals[idx++] = el_residual(state, m).residual_u;
  }
  CHECK(residuals[0] / residuals[1] == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("energy_gradient: stationarity at the homogeneous solution") {
  ChargeDistribution m = homogeneous_m(2, 1.5, 32);
  ScalarField u(m.grid, std::sqrt(1.5));
  ScalarField g = energy_gradient(u, m);
  const double mean = integrate(g) / m.grid.volume();
  double err = 0.0;
  for (double v : g.values) err = std::max(err, std::abs(v - mean));
  CHECK(err <= 1e-8);
}

TEST_CASE("energy_gradient: finite-difference oracle over 10 directions") {
  ChargeDistribution m = random_m(2, 4, 32, 2);
  // a generic positive u, deliberately off the solution
  ScalarField u(m.grid);
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = 0.8 + 0.4 * counter_uniform(99, i);
  ScalarField g = energy_gradient(u, m);
  const double eps = 1e-5;
  for (int dir = 0; dir < 10; ++dir) {
    ScalarField v(m.grid);
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = counter_uniform(1000 + dir, i) - 0.5;
    ScalarField up(m.grid), dn(m.grid);
    for (std::size_t i = 0; i < u.size(); ++i) {
      up[i] = u[i] + eps * v[i];
      dn[i] = u[i] - eps * v[i];
    }
    const double fd =
        (tfw_energy_value(up, m) - tfw_energy_value(dn, m)) / (2.0 * eps);
    const double an = inner(g, v);
    CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
  }
}

TEST_CASE("energy_gradient: directional derivative is linear in the direction") {
  ChargeDistribution m = homogeneous_m(2, 1.0, 32);
  ScalarField u(m.grid);
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = 1.0 + 0.2 * (counter_uniform(7, i) - 0.5);
  ScalarField g = energy_gradient(u, m);
  ScalarField v(m.grid);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = counter_uniform(8, i) - 0.5;
  const double mean = integrate(v) / m.grid.volume();
  for (double& x : v.values) x -= mean;  // zero-mean test direction
  ScalarField v2 = v;
  for (double& x : v2.values) x *= 2.0;
  CHECK(inner(g, v2) == doctest::Approx(2.0 * inner(g, v)).epsilon(1e-10));
}

TEST_CASE("translation equivariance: shifting m by a lattice vector shifts u") {
  EnsembleSpec spec = two_species_spec(2);
  const int L = 4, n = 32;
  PeriodicSample s = sample_periodic(spec, L, 19);
  // shift occupancy by one lattice vector along axis 0
  std::vector<int> shifted(s.occupancy.size());
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      shifted[static_cast<std::size_t>(i) * L + j] =
          s.occupancy[static_cast<std::size_t>((i + 1) % L) * L + j];
  PeriodicSample s2 = sample_from_occupancy(spec, L, shifted);

  SolverConfig cfg;
  cfg.tol = 1e-11;
  cfg.max_iter = 4000;
  TFWSolution a = solve_tfw(realize_charges(s, make_grid(s, n)), cfg);
  TFWSolution b = solve_tfw(realize_charges(s2, make_grid(s2, n)), cfg);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  const int steps = n / L;  // one lattice unit in grid steps
  double err = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double va = a.u[static_cast<std::size_t>((i + steps) % n) * n + j];
      const double vb = b.u[static_cast<std::size_t>(i) * n + j];
      err = std::max(err, std::abs(va - vb));
    }
  CHECK(err <= 1e-9);
}

TEST_CASE("boundedness: max u stays within a sane multiple of the local mass") {
  ChargeDistribution m = random_m(2, 4, 32, 44);
  TFWSolution sol = solve_tfw(m);
  REQUIRE(sol.converged);
  AssumptionReport rep = verify_assumptions(m, 0.25, 0.1);
  // empirical constant recorded here; the bound is qualitative
  CHECK(field_max(sol.u) <= 10.0 * (1.0 + rep.max_local_mass));
}

TEST_CASE("solver determinism: identical inputs give identical solutions") {
  ChargeDistribution m = random_m(2, 4, 32, 55);
  TFWSolution a = solve_tfw(m);
  TFWSolution b = solve_tfw(m);
  CHECK(a.iterations == b.iterations);
  CHECK(a.energy == b.energy);
  double err = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i)
    err = std::max(err, std::abs(a.u[i] - b.u[i]));
  CHECK(err == 0.0);
}

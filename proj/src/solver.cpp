#include "tfwlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tfwlab/rng.hpp"

namespace tfw {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kFourPi = 4.0 * kPi;

// u^{7/3} and u^{10/3} for u >= 0 via cbrt (markedly faster than pow).
inline double pow73(double u) { return u * u * std::cbrt(u); }
inline double pow103(double u) { return u * u * u * std::cbrt(u); }

// Potential of the mean-free charge imbalance. Off the constraint manifold
// the k = 0 mode of 4 pi (m - u^2) is projected out (the zero-mode gauge of
// the periodic cell); on it the projection is a no-op up to roundoff.
ScalarField poisson_of(const ScalarField& u, const ChargeDistribution& m) {
  ScalarField rhs(u.grid);
  for (std::size_t i = 0; i < rhs.size(); ++i)
    rhs[i] = kFourPi * (m.density[i] - u[i] * u[i]);
  return poisson_periodic_projected(rhs);
}

double tf_integral(const ScalarField& u) {
  double s = 0.0;
  for (double v : u.values) s += pow103(v);
  return s * u.grid.quad_weight();
}

struct Evaluation {
  double energy = 0.0;
  ScalarField phi;
};

Evaluation evaluate_energy(const ScalarField& u, const ChargeDistribution& m) {
  Evaluation ev;
  ev.phi = poisson_of(u, m);
  double coulomb = 0.0;
  const double w = u.grid.quad_weight();
  for (std::size_t i = 0; i < u.size(); ++i)
    coulomb += (m.density[i] - u[i] * u[i]) * ev.phi[i];
  ev.energy = dirichlet_energy(u) + tf_integral(u) + 0.5 * coulomb * w;
  return ev;
}

void rescale_to_mass(ScalarField& u, double mass) {
  double norm2 = 0.0;
  for (double v : u.values) norm2 += v * v;
  norm2 *= u.grid.quad_weight();
  const double factor = std::sqrt(mass / norm2);
  for (double& v : u.values) v *= factor;
}

// Relative norm of the theta-projected Euler-Lagrange residual at u.
double projected_residual(const ScalarField& u, const ChargeDistribution& m,
                          const ScalarField& phi) {
  ScalarField lap = variational_laplacian(u);
  ScalarField res(u.grid);
  for (std::size_t i = 0; i < res.size(); ++i)
    res[i] = -lap[i] + (5.0 / 3.0) * pow73(u[i]) - phi[i] * u[i];
  const double uu = inner(u, u);
  const double theta = -inner(u, res) / uu;
  for (std::size_t i = 0; i < res.size(); ++i) res[i] += theta * u[i];
  return l2_norm(res) / std::sqrt(uu);
}

// Diagonal Fourier preconditioner modeled on the Hessian at the homogeneous
// state: 2 k^2 + (40/9) rho^{2/3} + 16 pi rho / k^2.
ScalarField precondition(const ScalarField& r, double rho_bar) {
  const double beta = (40.0 / 9.0) * std::cbrt(rho_bar * rho_bar);
  const double q = 16.0 * kPi * rho_bar;
  return apply_inverse_quadratic_symbol(r, 2.0, beta, q);
}

}  // namespace

ScalarField energy_gradient(const ScalarField& u, const ChargeDistribution& m) {
  ScalarField phi = poisson_of(u, m);
  ScalarField lap = variational_laplacian(u);
  ScalarField g(u.grid);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = -2.0 * lap[i] + (10.0 / 3.0) * pow73(u[i]) - 2.0 * phi[i] * u[i];
  return g;
}

double tfw_energy_value(const ScalarField& u, const ChargeDistribution& m) {
  return evaluate_energy(u, m).energy;
}

TFWSolution homogeneous_reference(const GridSpec& grid, double c0) {
  if (c0 <= 0.0) throw InvalidInput("homogeneous density must be positive");
  TFWSolution sol;
  sol.u = ScalarField(grid, std::sqrt(c0));
  sol.phi = ScalarField(grid, 0.0);
  sol.theta = -(5.0 / 3.0) * std::cbrt(c0 * c0);
  sol.energy = std::pow(c0, 5.0 / 3.0) * grid.volume();
  sol.residual = 0.0;
  sol.converged = true;
  return sol;
}

TFWSolution make_state(const ScalarField& u_in, const ChargeDistribution& m) {
  const double mass = m.total_mass();
  if (mass <= 0.0) throw InvalidInput("charge distribution has no mass");
  TFWSolution sol;
  sol.u = u_in;
  rescale_to_mass(sol.u, mass);
  ScalarField lap = variational_laplacian(sol.u);
  sol.phi = poisson_of(sol.u, m);
  // A u = -lap u + (5/3) u^{7/3} - phi u;  theta = -<u, Au>/<u,u>
  ScalarField au(sol.u.grid);
  for (std::size_t i = 0; i < au.size(); ++i)
    au[i] = -lap[i] + (5.0 / 3.0) * pow73(sol.u[i]) - sol.phi[i] * sol.u[i];
  const double uu = inner(sol.u, sol.u);
  sol.theta = -inner(sol.u, au) / uu;
  ScalarField res = au;
  for (std::size_t i = 0; i < res.size(); ++i)
    res[i] += sol.theta * sol.u[i];
  sol.residual = l2_norm(res) / std::sqrt(uu);
  sol.energy = evaluate_energy(sol.u, m).energy;
  return sol;
}

ElResidual el_residual(const TFWSolution& sol, const ChargeDistribution& m) {
  ElResidual out;
  ScalarField lap_u = variational_laplacian(sol.u);
  ScalarField ru(sol.u.grid);
  for (std::size_t i = 0; i < ru.size(); ++i)
    ru[i] = -lap_u[i] + (5.0 / 3.0) * pow73(sol.u[i]) -
            (sol.phi[i] - sol.theta) * sol.u[i];
  out.residual_u = l2_norm(ru);
  ScalarField lap_phi = laplacian(sol.phi);
  ScalarField rphi(sol.phi.grid);
  for (std::size_t i = 0; i < rphi.size(); ++i)
    rphi[i] = -lap_phi[i] -
              kFourPi * (m.density[i] - sol.u[i] * sol.u[i]);
  out.residual_phi = l2_norm(rphi);
  return out;
}

TFWSolution solve_tfw(const ChargeDistribution& m, const SolverConfig& cfg) {
  check_finite(m.density, "charge density");
  if (field_min(m.density) < -1e-12)
    throw InvalidInput("charge density has negative values");
  const double mass = m.total_mass();
  if (mass <= 0.0) throw InvalidInput("total charge must be positive");
  if (cfg.tol <= 0.0) throw InvalidInput("solver tolerance must be positive");

  const GridSpec& grid = m.grid;
  const double volume = grid.volume();
  const double rho_bar = mass / volume;

  TFWSolution sol;
  sol.u = ScalarField(grid, std::sqrt(rho_bar));
  if (cfg.init == InitStrategy::perturbed) {
    for (std::size_t i = 0; i < sol.u.size(); ++i)
      sol.u[i] *= 1.0 + 0.1 * (counter_uniform(cfg.perturb_seed, i) - 0.5);
  }
  rescale_to_mass(sol.u, mass);

  double step = cfg.step_init;
  double energy = 0.0;
  double prev_energy = 0.0;
  bool have_prev = false;

  for (int iter = 0; iter <= cfg.max_iter; ++iter) {
    ScalarField lap = variational_laplacian(sol.u);
    sol.phi = poisson_of(sol.u, m);
    const double w = grid.quad_weight();
    double coulomb = 0.0;
    for (std::size_t i = 0; i < sol.u.size(); ++i)
      coulomb += (m.density[i] - sol.u[i] * sol.u[i]) * sol.phi[i];
    energy = dirichlet_energy(sol.u) + tf_integral(sol.u) + 0.5 * coulomb * w;

    // residual R = A u + theta u; the projected gradient equals 2 R
    ScalarField res(grid);
    for (std::size_t i = 0; i < res.size(); ++i)
      res[i] = -lap[i] + (5.0 / 3.0) * pow73(sol.u[i]) -
               sol.phi[i] * sol.u[i];
    const double uu = inner(sol.u, sol.u);
    sol.theta = -inner(sol.u, res) / uu;
    for (std::size_t i = 0; i < res.size(); ++i)
      res[i] += sol.theta * sol.u[i];
    sol.residual = l2_norm(res) / std::sqrt(uu);
    sol.iterations = iter;
    if (cfg.keep_log)
      sol.log.push_back({iter, energy, sol.residual, step});

    const double dE =
        have_prev ? std::abs(energy - prev_energy) : 0.0;
    if (sol.residual <= cfg.tol &&
        (!have_prev || dE <= cfg.energy_tol * std::max(std::abs(energy), 1.0))) {
      sol.converged = true;
      break;
    }
    if (iter == cfg.max_iter) break;

    ScalarField dir = precondition(res, rho_bar);
    const double slope = 2.0 * inner(res, dir);  // directional derivative

    bool accepted = false;
    double trial_energy = 0.0;
    ScalarField trial;
    // Near the minimizer the achievable decrease ~ |R|^2 falls below the
    // roundoff noise of the energy sum; there the line search switches to
    // the residual, which keeps its dynamic range.
    const double eps_budget =
        64.0 * std::numeric_limits<double>::epsilon() *
        (std::abs(energy) + 1.0) *
        std::sqrt(static_cast<double>(grid.size()));
    while (step >= cfg.step_min) {
      trial = sol.u;
      for (std::size_t i = 0; i < trial.size(); ++i)
        trial[i] = std::abs(trial[i] - step * dir[i]);
      rescale_to_mass(trial, mass);
      Evaluation trial_eval = evaluate_energy(trial, m);
      trial_energy = trial_eval.energy;
      if (trial_energy <= energy - 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      if (step * slope <= eps_budget &&
          trial_energy <= energy + eps_budget &&
          projected_residual(trial, m, trial_eval.phi) < sol.residual) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled at numerical precision

    sol.u = std::move(trial);
    prev_energy = energy;
    energy = trial_energy;
    have_prev = true;
    step = std::min(step * 1.25, 16.0);
  }

  sol.energy = energy;
  return sol;
}

}  // namespace tfw

#include "tfwlab/energy.hpp"

#include <cmath>

namespace tfw {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

inline double pow103(double u) { return u * u * u * std::cbrt(u); }

const ScalarField& continuous_part(const ChargeDistribution& m,
                                   NucleusMode mode) {
  return mode == NucleusMode::smeared ? m.density : m.background;
}

void require_mode_valid(const ChargeDistribution& m, NucleusMode mode) {
  if (mode == NucleusMode::point && m.grid.dim != 3)
    throw InvalidInput(
        "point mode is defined for the 3-d Coulomb kernel only");
}

}  // namespace

double gaussian_self_potential(double sigma) {
  if (sigma <= 0.0) throw InvalidInput("sigma must be positive");
  return std::sqrt(2.0 / kPi) / sigma;
}

double point_term(const TFWSolution& sol, const ChargeDistribution& m,
                  std::size_t nucleus_index) {
  require_mode_valid(m, NucleusMode::point);
  if (nucleus_index >= m.nuclei.size())
    throw InvalidInput("nucleus index out of range");
  const Nucleus& nuc = m.nuclei[nucleus_index];
  const double phi_at = interpolate(sol.phi, nuc.position);
  return nuc.charge *
         (phi_at - nuc.charge * gaussian_self_potential(m.sigma));
}

EnergyBreakdown energy_rve(const TFWSolution& sol, const ChargeDistribution& m,
                           NucleusMode mode, double residual_cap) {
  require_mode_valid(m, mode);
  if (!(sol.residual <= residual_cap))
    throw InvalidInput("solution residual " + std::to_string(sol.residual) +
                       " exceeds the energy evaluation cap");
  EnergyBreakdown e;
  e.mode = mode;
  e.sigma = m.sigma;
  e.grid_n = m.grid.n;
  e.kinetic = dirichlet_energy(sol.u);
  const double w = m.grid.quad_weight();
  const ScalarField& cont = continuous_part(m, mode);
  double tf = 0.0, coul = 0.0;
  for (std::size_t i = 0; i < sol.u.size(); ++i) {
    const double u = sol.u[i];
    tf += pow103(u);
    coul += (cont[i] - u * u) * sol.phi[i];
  }
  e.tf = tf * w;
  e.coulomb_cont = 0.5 * coul * w;
  if (mode == NucleusMode::point) {
    for (std::size_t x = 0; x < m.nuclei.size(); ++x)
      e.coulomb_point += point_term(sol, m, x);
  }
  e.total = e.kinetic + e.tf + e.coulomb_cont + e.coulomb_point;
  e.per_volume = e.total / m.grid.volume();
  return e;
}

double windowed_energy(const TFWSolution& sol, const ChargeDistribution& m,
                       const Box& window, NucleusMode mode) {
  require_mode_valid(m, mode);
  const int d = m.grid.dim;
  const Box cell = cell_box(m.grid);
  for (int a = 0; a < d; ++a)
    if (window.lo[a] < cell.lo[a] - 1e-12 || window.hi[a] > cell.hi[a] + 1e-12)
      throw InvalidInput("window extends outside the period cell");

  std::vector<ScalarField> grad = gradient(sol.u);
  const ScalarField& cont = continuous_part(m, mode);
  const double w = m.grid.quad_weight();
  double acc = 0.0;
  for (std::size_t i = 0; i < sol.u.size(); ++i) {
    if (!window.contains(m.grid.coord(i), d)) continue;
    double g2 = 0.0;
    for (int a = 0; a < d; ++a) g2 += grad[a][i] * grad[a][i];
    const double u = sol.u[i];
    acc += g2 + pow103(u) + 0.5 * (cont[i] - u * u) * sol.phi[i];
  }
  double total = acc * w;
  if (mode == NucleusMode::point) {
    for (std::size_t x = 0; x < m.nuclei.size(); ++x)
      if (window.contains(m.nuclei[x].position, d))
        total += point_term(sol, m, x);
  }
  return total;
}

}  // namespace tfw

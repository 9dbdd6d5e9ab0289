#pragma once

#include "tfwlab/solver.hpp"

namespace tfw {

// How the nuclear point charges enter the energy. In smeared mode the whole
// realized density counts as continuous charge and the point sum is empty.
// In point mode (3-d only) the continuous part is the background alone and
// each nucleus contributes charge * (phi - self potential) at its center,
// the grid counterpart of subtracting the decaying Coulomb field of that
// nucleus.
enum class NucleusMode { smeared, point };

struct EnergyBreakdown {
  double kinetic = 0.0;        // int |grad u|^2
  double tf = 0.0;             // int u^{10/3}
  double coulomb_cont = 0.0;   // 1/2 int (m_c - u^2) phi
  double coulomb_point = 0.0;  // sum_x c_x (phi - phi_x)(x)
  double total = 0.0;
  double per_volume = 0.0;     // total / (L^d det F)
  NucleusMode mode = NucleusMode::smeared;
  double sigma = 0.0;
  int grid_n = 0;
};

// Peak potential at the center of a unit Gaussian charge of width sigma in
// three dimensions (the smeared self potential): sqrt(2/pi)/sigma. Validated
// against the radial quadrature oracle in the test suite.
double gaussian_self_potential(double sigma);

// Point-term contribution of one nucleus, c_x * (phi(x) - c_x * K_sigma),
// with phi evaluated by trigonometric interpolation.
double point_term(const TFWSolution& sol, const ChargeDistribution& m,
                  std::size_t nucleus_index);

// Energy of Definition-style breakdown over the whole cell, normalized per
// volume. Requires sol.residual <= residual_cap.
EnergyBreakdown energy_rve(const TFWSolution& sol, const ChargeDistribution& m,
                           NucleusMode mode = NucleusMode::smeared,
                           double residual_cap = 1e-6);

// Energy restricted to an axis-aligned window: integrals over grid points in
// the half-open box plus the point sum over nuclei with centers inside.
// Additive over partitions of the cell.
double windowed_energy(const TFWSolution& sol, const ChargeDistribution& m,
                       const Box& window,
                       NucleusMode mode = NucleusMode::smeared);

}  // namespace tfw

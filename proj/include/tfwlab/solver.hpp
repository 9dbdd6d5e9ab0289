#pragma once

#include <cstdint>
#include <vector>

#include "tfwlab/lattice.hpp"

namespace tfw {

enum class InitStrategy { uniform, perturbed };

struct SolverConfig {
  double tol = 1e-8;           // relative Euler-Lagrange residual target
  double energy_tol = 1e-12;   // relative energy change per accepted step
  int max_iter = 1000;
  double step_init = 1.0;
  double step_min = 1e-13;
  InitStrategy init = InitStrategy::uniform;
  std::uint64_t perturb_seed = 1;  // for InitStrategy::perturbed
  bool keep_log = false;
};

struct IterationRecord {
  int iter = 0;
  double energy = 0.0;
  double residual = 0.0;
  double step = 0.0;
};

// Ground state of the periodic TFW system for a given charge distribution:
//   -lap(u) + (5/3) u^{7/3} - phi u + theta u = 0
//   -lap(phi) = 4 pi (m - u^2),   mean(phi) = 0,   int u^2 = int m.
// theta is the charge-constraint multiplier, read off as the Rayleigh
// quotient theta = -<u, -lap(u) + (5/3)u^{7/3} - phi u> / <u, u>.
struct TFWSolution {
  ScalarField u;
  ScalarField phi;
  double theta = 0.0;
  double energy = 0.0;     // smeared-density energy of the minimizer
  double residual = 0.0;   // relative EL residual at exit
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> log;
};

struct SolverFailure : TfwError {
  using TfwError::TfwError;
};

TFWSolution solve_tfw(const ChargeDistribution& m, const SolverConfig& cfg = {});

// Closed-form solution for a homogeneous density c0: u = sqrt(c0), phi = 0,
// theta = -(5/3) c0^{2/3}.
TFWSolution homogeneous_reference(const GridSpec& grid, double c0);

// Consistent solver state for a given positive u: phi from the Poisson solve
// of the rescaled u, theta from the Rayleigh quotient. Used by residual
// probes and tests.
TFWSolution make_state(const ScalarField& u, const ChargeDistribution& m);

// L2 norms of the two Euler-Lagrange equation residuals,
// (|-lap u + (5/3)u^{7/3} - (phi - theta) u|_2, |-lap phi - 4pi(m - u^2)|_2).
struct ElResidual {
  double residual_u = 0.0;
  double residual_phi = 0.0;
};

ElResidual el_residual(const TFWSolution& sol, const ChargeDistribution& m);

// First variation of the energy: dE/du = -2 lap u + (10/3) u^{7/3} - 2 phi u
// with phi = poisson(4 pi (m - u^2)). The mean part is absorbed by theta.
ScalarField energy_gradient(const ScalarField& u, const ChargeDistribution& m);

// Energy of the smeared functional at a given u (phi recomputed).
double tfw_energy_value(const ScalarField& u, const ChargeDistribution& m);

}  // namespace tfw

#pragma once

#include <array>

#include "tfwlab/energy.hpp"

namespace tfw {

struct SiteEdit {
  Eigen::Vector3i site = Eigen::Vector3i::Zero();
  int new_species = 0;
};

struct RegionEdit {
  Box region;
  double new_background = 0.0;  // replaces m_c inside the region
};

struct PerturbationSpec {
  PeriodicSample base;
  std::vector<SiteEdit> site_edits;
  std::vector<RegionEdit> region_edits;

  bool empty() const { return site_edits.empty() && region_edits.empty(); }
};

struct PerturbationResult {
  ScalarField w;    // u1 - u2
  ScalarField psi;  // phi1 - phi2
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // centroid of the edits
  TFWSolution sol_base, sol_edited;
  ChargeDistribution m_base, m_edited;
  std::vector<Eigen::Vector3d> charge_diff_points;  // P': sites with dc != 0
};

// Solves the TFW system for the base and the edited charge distribution with
// identical solver settings and returns the difference fields.
PerturbationResult perturb_and_solve(const PerturbationSpec& pspec, int grid_n,
                                     const SolverConfig& cfg);

struct DecayFit {
  double gamma = 0.0;      // field-level rate: value ~ exp(-gamma r)
  double intercept = 0.0;
  double r_squared = 0.0;
  double noise_floor = 0.0;
  std::size_t points_used = 0;
  bool no_decay = false;   // flagged when gamma <= 0 or the fit is flat
};

// Weighted least squares of log(value) against radius over entries above the
// noise floor. Entries are (radius, value, weight).
DecayFit decay_fit(const std::vector<std::array<double, 3>>& points,
                   double floor);

// Convenience: fit the L2 column of a shell profile, truncated at max_radius.
DecayFit decay_fit_shells(const std::vector<ShellStat>& shells, double floor,
                          double max_radius);

struct WeightedNormReport {
  // LHS: int (w^2 + |grad w|^2 + psi^2 + eta |grad psi|^2
  //           + eta^2 sum_ij |d_ij psi|^2) e^{-2 gamma |x-y|}
  double lhs = 0.0;
  // RHS: int_{eta<1} (w^2 + psi^2) e^{-2 gamma |x-y|}
  //      + int (delta m_c)^2 e^{-2 gamma |x-y|}
  double rhs = 0.0;
};

WeightedNormReport weighted_norm(const ScalarField& w, const ScalarField& psi,
                                 const CutoffEta& eta, double gamma,
                                 const Eigen::Vector3d& y,
                                 const ScalarField& delta_mc);

// Tiles the cell with unit cubes and returns (periodic distance from the
// perturbation support, |windowed energy difference|), sorted by distance.
std::vector<std::pair<double, double>> window_decay_study(
    const PerturbationResult& result, NucleusMode mode = NucleusMode::smeared);

}  // namespace tfw

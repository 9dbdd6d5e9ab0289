#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tfwlab/lattice.hpp"

namespace tfw {

// One statistical quantity of a periodized sample. Densities are normalized
// by det(F) * L^d, so for occupancy fractions on a unit lattice the species
// density of species a equals the fraction of a-sites.
struct Descriptor {
  enum class Kind { species, nn_pair, motif };
  Kind kind = Kind::species;
  int a = 0;
  int b = 0;                                           // nn_pair only
  std::vector<std::pair<Eigen::Vector3i, int>> pattern;  // motif only

  static Descriptor species_of(int a);
  static Descriptor pair_of(int a, int b);
  static Descriptor motif_of(std::vector<std::pair<Eigen::Vector3i, int>> p);
  std::string tag() const;
};

// Fraction of lattice sites occupied by species a, per det F.
double species_density(const PeriodicSample& s, int a);

// Density of sites of species a having at least one axis neighbor (along
// +-F e_j) of species b, with periodic wrap.
double nn_contact_density(const PeriodicSample& s, int a, int b);

// Density of anchor sites x such that occupancy(x + offset) matches the
// required species for every (offset, species) entry.
double motif_density(const PeriodicSample& s,
                     const std::vector<std::pair<Eigen::Vector3i, int>>& pattern);

std::vector<double> eval_stats(const PeriodicSample& s,
                               const std::vector<Descriptor>& descriptors);

// Analytic expectations under the i.i.d. occupancy law:
//   E[species a]  = p_a / det F
//   E[pair (a,b)] = p_a (1 - (1 - p_b)^{2d}) / det F   (also for a = b)
//   E[motif]      = prod over distinct offsets of p / det F.
// The pair formula treats the 2d neighbors as distinct sites, exact for
// L >= 3; smaller periods need the pilot estimate.
std::vector<double> expected_stats(const EnsembleSpec& spec,
                                   const std::vector<Descriptor>& descriptors);

// Exact standard deviation where a closed form is available (species
// descriptors: sqrt(p(1-p) / (det F^2 L^d))); nullopt otherwise.
std::optional<double> analytic_stat_sd(const EnsembleSpec& spec,
                                       const Descriptor& d, int L);

struct DegenerateStatistics : TfwError {
  using TfwError::TfwError;
};

struct CorrelationReport {
  double mean_energy = 0.0;
  double var_energy = 0.0;
  std::vector<double> mean_stats;
  std::vector<std::vector<double>> cov_stats;  // N x N, unbiased
  std::vector<double> cov_energy_stats;        // N
  double explained_fraction = 0.0;             // |rho|^2 in [0,1]
  double condition_number = 1.0;               // kappa of the joint covariance
  double r_var = 0.0;                          // L^{-d} / Var E
  std::size_t samples = 0;
  bool pseudo_inverse_used = false;            // eigenvalue cutoff triggered
  bool degenerate_stats = false;               // some Var F_i == 0
};

// Unbiased sample moments of paired (energy, stats) draws; N = stats size.
// Requires at least N + 2 samples. The explained fraction follows
// Cov[E,F] (Var F)^{-1} Cov[F,E] / Var E with a relative eigenvalue cutoff
// of 1e-12 on Var F.
CorrelationReport correlation_report(
    const std::vector<double>& energies,
    const std::vector<std::vector<double>>& stats, int L, int dim);

}  // namespace tfw

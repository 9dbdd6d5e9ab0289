#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tfwlab/grid.hpp"

namespace tfw {

// Bravais lattice spanned by the columns of F (lattice units).
struct BravaisLattice {
  int dim = 3;
  Eigen::Matrix3d F = Eigen::Matrix3d::Identity();

  void validate() const;
  // Shortest nonzero lattice vector, scanned over |z|_inf <= 2.
  double min_site_distance() const;
};

struct Species {
  double charge = 1.0;
  double prob = 1.0;
};

// Discrete law of the per-site nuclear charge. An empty table means a purely
// continuous (background-only) charge distribution.
struct SpeciesTable {
  std::vector<Species> entries;

  void validate() const;
  std::size_t count() const { return entries.size(); }
};

struct EnsembleSpec {
  BravaisLattice lattice;
  SpeciesTable species;
  double sigma = 0.0;       // Gaussian smearing width of point charges
  double rho_sep = 0.25;    // exclusion radius: site spacing >= 4 * rho_sep
  double background = 0.0;  // constant continuous charge density

  void validate() const;
  bool has_nuclei() const { return !species.entries.empty(); }
};

// One L-periodization draw: i.i.d. species indices on the L^dim sites of
// F [0,L)^dim. Occupancy is a pure function of (spec, L, seed).
struct PeriodicSample {
  EnsembleSpec spec;
  int L = 0;
  std::uint64_t seed = 0;
  std::vector<int> occupancy;

  std::size_t site_count() const { return occupancy.size(); }
  // Flattened site index, axis 0 slowest (row-major like grid storage).
  std::size_t site_index(const Eigen::Vector3i& z) const;
  Eigen::Vector3i site_coords(std::size_t flat) const;
  Eigen::Vector3d site_position(std::size_t flat) const;
};

PeriodicSample sample_periodic(const EnsembleSpec& spec, int L,
                               std::uint64_t seed);

// Explicit occupancy (used for enumeration tests and perturbation edits).
PeriodicSample sample_from_occupancy(const EnsembleSpec& spec, int L,
                                     std::vector<int> occupancy);

std::string sample_to_json(const PeriodicSample& s);

struct Nucleus {
  Eigen::Vector3d position;
  double charge = 0.0;
};

// Realization of a sample on a grid: `density` carries background plus the
// periodic-Gaussian smeared nuclei and is what the solver consumes;
// `background` keeps the continuous part for point-mode energies.
struct ChargeDistribution {
  GridSpec grid;
  ScalarField density;
  ScalarField background;
  std::vector<Nucleus> nuclei;
  double sigma = 0.0;

  double total_mass() const { return integrate(density); }
};

GridSpec make_grid(const PeriodicSample& sample, int n);

ChargeDistribution realize_charges(const PeriodicSample& sample,
                                   const GridSpec& grid);

// Axis-aligned half-open box [lo, hi) in physical coordinates.
struct Box {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();

  bool contains(const Eigen::Vector3d& x, int dim) const;
  double volume(int dim) const;
};

Box cell_box(const GridSpec& grid);
Box cube_at(const Eigen::Vector3d& center, double side, int dim);

// Restriction of m to the window, extended outside by the unit Lebesgue
// density; nuclei centered outside the window are dropped, kept nuclei are
// re-smeared so their tails cross the window boundary like point masses.
ChargeDistribution restrict_extend(const ChargeDistribution& m,
                                   const Box& window);

struct AssumptionReport {
  double min_nucleus_separation = 0.0;  // inf if < 2 nuclei
  double max_local_mass = 0.0;          // max unit-ball mass M-hat
  double min_ball_average_r1 = 0.0;     // radius 1/omega0
  double min_ball_average_r2 = 0.0;     // radius 2/omega0
  bool separation_ok = true;
  bool lower_bound_ok = true;
};

AssumptionReport verify_assumptions(const ChargeDistribution& m,
                                    double rho_sep, double omega0);

}  // namespace tfw

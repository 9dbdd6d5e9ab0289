#pragma once

#include <optional>

#include "tfwlab/energy.hpp"
#include "tfwlab/stats.hpp"

namespace tfw {

// Everything needed to evaluate one representative volume.
struct ExperimentSetup {
  EnsembleSpec spec;
  int L = 4;
  int grid_n = 32;
  SolverConfig solver;
  NucleusMode mode = NucleusMode::smeared;
};

enum class CriterionMode { raw, standardized };
enum class ExpectationSource { analytic, pilot };

struct SelectionConfig {
  double delta = 0.5;
  std::vector<Descriptor> descriptors;
  CriterionMode mode = CriterionMode::standardized;
  long plain_budget = 0;
  long selected_budget = 0;
  long pilot_count = 1000;
  std::vector<int> L_list;
  std::uint64_t seed = 0;
  long candidate_cap = 200000;
  bool record_rejected = false;  // retain rejected candidates' statistics

  void validate() const;
};

// Reference law of the statistics used by the criterion. Means come from the
// analytic i.i.d. expectation when available, otherwise from a pilot run;
// standard deviations are analytic for species densities, pilot otherwise.
struct StatLaw {
  std::vector<double> mean;
  std::vector<double> sd;
  ExpectationSource mean_source = ExpectationSource::analytic;
  ExpectationSource sd_source = ExpectationSource::analytic;
};

StatLaw stat_law(const EnsembleSpec& spec, int L,
                 const std::vector<Descriptor>& descriptors,
                 CriterionMode mode, long pilot_count, std::uint64_t seed);

// The acceptance predicate of the selection approach. Raw mode tests every
// component against delta * L^{-d/2}; standardized mode against delta * sd_i.
bool selection_accepts(const std::vector<double>& stats, const StatLaw& law,
                       double delta, CriterionMode mode, int L, int dim);

struct SampleRecord {
  std::uint64_t index = 0;
  double energy = 0.0;
  std::vector<double> stats;
  int iterations = 0;
  bool converged = false;
  bool accepted = true;
};

struct RunStream {
  std::vector<SampleRecord> records;  // in candidate-index order
  std::vector<SampleRecord> rejected; // kept only when record_rejected is set
  long candidates = 0;
  long solves = 0;
  long failures = 0;

  std::vector<double> energies() const;          // converged records only
  std::vector<std::vector<double>> stat_rows() const;
};

// Plain representative-volume Monte Carlo: every candidate is realized,
// solved, and scored. Per-candidate seeds are derive_seed(seed, index), so
// plain and selected runs over the same seed share candidates.
RunStream run_plain(const ExperimentSetup& setup,
                    const std::vector<Descriptor>& descriptors, long budget,
                    std::uint64_t seed);

struct SelectionStarvation : TfwError {
  long candidates_tried = 0;
  SelectionStarvation(const std::string& what, long tried)
      : TfwError(what), candidates_tried(tried) {}
};

// Selection run: statistics are evaluated first and only accepted candidates
// are solved. Aborts with SelectionStarvation when the candidate cap is
// reached with zero acceptances.
RunStream run_selected(const ExperimentSetup& setup, const SelectionConfig& cfg,
                       const StatLaw& law, std::uint64_t seed);

// Acceptance-rate measurement without any PDE solves.
struct RateStudy {
  long candidates = 0;
  long accepted = 0;
  double rate = 0.0;
};

RateStudy selection_rate_study(const EnsembleSpec& spec, int L,
                               const SelectionConfig& cfg, const StatLaw& law,
                               long candidates, std::uint64_t seed);

// ---- empirical checks of the selection error analysis ----------------------

struct VarianceReductionCheck {
  double ratio = 0.0;       // Var E_sel / Var E_plain
  double bound = 0.0;       // 1 - (1 - delta^2) |rho|^2
  double se_ratio = 0.0;    // bootstrap standard errors (1000 resamples)
  double se_bound = 0.0;
  double explained = 0.0;
  bool pass = false;        // ratio <= bound + 3 combined s.e.
  bool strict_pass = false; // ratio < 1 - 3 se_ratio
  bool degenerate = false;
};

VarianceReductionCheck variance_reduction_check(const RunStream& plain,
                                                const RunStream& selected,
                                                double delta, int L, int dim,
                                                std::uint64_t boot_seed);

struct MeanShiftCheck {
  double shift = 0.0;
  double se_combined = 0.0;
  bool pass = false;  // |shift| <= 3 combined s.e.
  bool degenerate = false;
};

MeanShiftCheck mean_shift_check(const RunStream& plain,
                                const RunStream& selected,
                                std::uint64_t boot_seed);

struct DegenerateVariance : TfwError {
  using TfwError::TfwError;
};

struct CltFit {
  double slope = 0.0;
  double slope_se = 0.0;
  std::vector<std::pair<int, double>> variances;  // (L, Var E)
};

// Least squares of log Var E against log L; refuses zero variances.
CltFit fit_variance_slope(const std::vector<std::pair<int, std::vector<double>>>&
                              energies_per_L);

// Runs plain streams for each L (grid_n = points_per_unit * L) and fits the
// scaling of Var E^RVE_L.
CltFit clt_scaling_study(const EnsembleSpec& spec, int points_per_unit,
                         const SolverConfig& solver, NucleusMode mode,
                         const std::vector<int>& L_list, long budget,
                         std::uint64_t seed);

// Energy content of the window remainder: for each width w, the difference
// |E_{Q1(y)}[m] - E_{Q1(y)}[restrict_extend(m, Q_w(y))]| at the cell center.
std::vector<std::pair<double, double>> multilevel_remainder_diag(
    const PeriodicSample& sample, int grid_n, const SolverConfig& solver,
    const std::vector<double>& widths, NucleusMode mode = NucleusMode::smeared);

// ---- aggregated report ------------------------------------------------------

struct LRunReport {
  int L = 0;
  long plain_count = 0;
  long selected_count = 0;
  long candidates = 0;
  long selected_solves = 0;
  double acceptance_rate = 0.0;
  double plain_mean = 0.0, plain_var = 0.0;
  double selected_mean = 0.0, selected_var = 0.0;
  CorrelationReport correlation;
  VarianceReductionCheck variance_check;
  MeanShiftCheck shift_check;
  StatLaw law;
  bool degenerate_variance = false;
  bool delta_range_warning = false;  // delta^N < L^{-d/2}
  bool checks_run = false;  // both streams reached 100 samples, variance sane
  RunStream plain_stream;
  RunStream selected_stream;
};

struct RunReport {
  std::vector<LRunReport> per_L;
  std::optional<CltFit> clt;
};

// Full plain-vs-selected experiment over cfg.L_list (grid_n scales as
// points_per_unit * L).
RunReport run_mc_experiment(const EnsembleSpec& spec, int points_per_unit,
                            const SolverConfig& solver, NucleusMode mode,
                            const SelectionConfig& cfg);

}  // namespace tfw

#pragma once

#include <optional>

#include "tfwlab/locality.hpp"
#include "tfwlab/selection.hpp"

namespace tfw {

struct ConfigError : TfwError {
  int line = 0;
  ConfigError(const std::string& what, int line_)
      : TfwError(what + " (line " + std::to_string(line_) + ")"), line(line_) {}
  explicit ConfigError(const std::string& what) : TfwError(what) {}
};

struct GridConfig {
  int points_per_unit = 8;  // grid points per lattice unit: n = ppu * L
  std::vector<int> L_list;
  NucleusMode nucleus_mode = NucleusMode::smeared;
};

struct OutputConfig {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  bool svg = false;
};

struct PerturbationConfig {
  std::vector<SiteEdit> site_edits;
  std::vector<RegionEdit> region_edits;
  double gamma = 0.2;        // weight rate for the weighted-norm report
  double shell_width = 0.5;  // radial bin width for decay profiles
};

// Strictly parsed experiment file: sections [ensemble], [grid], [solver],
// [selection], [perturbation], [output] plus a root-level seed. Unknown keys
// or sections are rejected with their line number.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<EnsembleSpec> ensemble;
  std::optional<GridConfig> grid;
  std::optional<SolverConfig> solver;
  std::optional<SelectionConfig> selection;
  std::optional<PerturbationConfig> perturbation;
  OutputConfig output;
  std::uint64_t config_hash = 0;  // FNV-1a of the raw file text
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Batch commands. Exit codes: 0 success, 1 config error, 2 solver
// non-convergence, 3 selection starvation.
int cmd_solve(const std::string& config_path,
              std::optional<std::uint64_t> seed_override, bool verbose);
int cmd_mc(const std::string& config_path,
           std::optional<std::uint64_t> seed_override, bool verbose);
int cmd_locality(const std::string& config_path,
                 std::optional<std::uint64_t> seed_override, bool verbose);

}  // namespace tfw

#include "tfwlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tfwlab/io.hpp"
#include "tfwlab/rng.hpp"

namespace tfw {

namespace {

using nlohmann::json;

std::vector<std::string> tokenize(const std::string& s,
                                  const std::string& extra_seps = "") {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' ||
        extra_seps.find(c) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_number(const std::string& tok, int line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + tok + "'", line);
  }
  if (pos != tok.size())
    throw ConfigError("trailing characters in number '" + tok + "'", line);
  return v;
}

long parse_integer(const std::string& tok, int line) {
  const double v = parse_number(tok, line);
  if (v != std::floor(v))
    throw ConfigError("expected an integer, got '" + tok + "'", line);
  return static_cast<long>(v);
}

bool parse_bool(const std::string& tok, int line) {
  if (tok == "true" || tok == "1" || tok == "yes") return true;
  if (tok == "false" || tok == "0" || tok == "no") return false;
  throw ConfigError("expected a boolean, got '" + tok + "'", line);
}

std::vector<Descriptor> parse_descriptors(const std::string& value, int line) {
  std::vector<Descriptor> out;
  for (const auto& tok : tokenize(value)) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : tok) {
      if (c == ':') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    if (parts[0] == "species" && parts.size() == 2) {
      out.push_back(Descriptor::species_of(
          static_cast<int>(parse_integer(parts[1], line))));
    } else if (parts[0] == "pair" && parts.size() == 3) {
      out.push_back(
          Descriptor::pair_of(static_cast<int>(parse_integer(parts[1], line)),
                              static_cast<int>(parse_integer(parts[2], line))));
    } else if (parts[0] == "motif" && parts.size() >= 2) {
      // motif:dx,dy,dz=s:dx,dy,dz=s ... with commas consumed by tokenize;
      // accept the compact form motif:dx;dy;dz=s instead
      std::vector<std::pair<Eigen::Vector3i, int>> pattern;
      for (std::size_t p = 1; p < parts.size(); ++p) {
        const auto eq = parts[p].find('=');
        if (eq == std::string::npos)
          throw ConfigError("motif entry needs offset=species", line);
        const auto offs = tokenize(parts[p].substr(0, eq), ";");
        if (offs.size() < 1 || offs.size() > 3)
          throw ConfigError("motif offset needs 1..3 components", line);
        Eigen::Vector3i off = Eigen::Vector3i::Zero();
        for (std::size_t a = 0; a < offs.size(); ++a)
          off[a] = static_cast<int>(parse_integer(offs[a], line));
        pattern.emplace_back(
            off, static_cast<int>(parse_integer(parts[p].substr(eq + 1), line)));
      }
      out.push_back(Descriptor::motif_of(std::move(pattern)));
    } else {
      throw ConfigError("unknown descriptor '" + tok + "'", line);
    }
  }
  if (out.empty()) throw ConfigError("descriptor list is empty", line);
  return out;
}

struct RawConfig {
  // section -> key -> (value, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>>
      entries;
};

RawConfig lex_config(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  std::string section;  // "" = root
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    auto end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("malformed section header", lineno);
      section = line.substr(1, line.size() - 2);
      raw.entries[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value", lineno);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    if (key.empty()) throw ConfigError("empty key", lineno);
    auto& sec = raw.entries[section];
    if (sec.count(key))
      throw ConfigError("duplicate key '" + key + "'", lineno);
    sec[key] = {value, lineno};
  }
  return raw;
}

// Pulls a key out of a section map, erasing it so leftovers can be reported.
std::optional<std::pair<std::string, int>> take(
    std::map<std::string, std::pair<std::string, int>>& sec,
    const std::string& key) {
  auto it = sec.find(key);
  if (it == sec.end()) return std::nullopt;
  auto v = it->second;
  sec.erase(it);
  return v;
}

void reject_leftovers(
    const std::string& section,
    const std::map<std::string, std::pair<std::string, int>>& sec) {
  if (sec.empty()) return;
  const auto& [key, val] = *sec.begin();
  throw ConfigError("unknown key '" + key + "' in section [" + section + "]",
                    val.second);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  RawConfig raw = lex_config(text);
  ExperimentConfig cfg;
  cfg.config_hash = fnv1a(text);

  for (const auto& [name, _] : raw.entries) {
    static const char* known[] = {"",          "ensemble", "grid",
                                  "solver",    "selection", "perturbation",
                                  "output"};
    bool ok = false;
    for (const char* k : known) ok = ok || name == k;
    if (!ok) throw ConfigError("unknown section [" + name + "]");
  }

  if (raw.entries.count("")) {
    auto& root = raw.entries[""];
    if (auto v = take(root, "seed"))
      cfg.seed = static_cast<std::uint64_t>(parse_integer(v->first, v->second));
    reject_leftovers("<root>", root);
  }

  if (raw.entries.count("ensemble")) {
    auto& sec = raw.entries["ensemble"];
    EnsembleSpec spec;
    if (auto v = take(sec, "dimension"))
      spec.lattice.dim = static_cast<int>(parse_integer(v->first, v->second));
    if (auto v = take(sec, "lattice")) {
      const auto rows = tokenize(v->first, ";");
      const int d = spec.lattice.dim;
      if (static_cast<int>(rows.size()) != d * d)
        throw ConfigError("lattice needs dim^2 entries (rows of F)", v->second);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          spec.lattice.F(r, c) = parse_number(rows[r * d + c], v->second);
    }
    if (auto v = take(sec, "species")) {
      for (const auto& tok : tokenize(v->first)) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos)
          throw ConfigError("species entry needs charge:probability", v->second);
        Species s;
        s.charge = parse_number(tok.substr(0, colon), v->second);
        s.prob = parse_number(tok.substr(colon + 1), v->second);
        spec.species.entries.push_back(s);
      }
    }
    if (auto v = take(sec, "sigma"))
      spec.sigma = parse_number(v->first, v->second);
    if (auto v = take(sec, "rho_sep"))
      spec.rho_sep = parse_number(v->first, v->second);
    if (auto v = take(sec, "background"))
      spec.background = parse_number(v->first, v->second);
    reject_leftovers("ensemble", sec);
    try {
      spec.validate();
    } catch (const InvalidInput& err) {
      throw ConfigError(std::string("invalid ensemble: ") + err.what());
    }
    cfg.ensemble = spec;
  }

  if (raw.entries.count("grid")) {
    auto& sec = raw.entries["grid"];
    GridConfig g;
    if (auto v = take(sec, "points_per_unit"))
      g.points_per_unit = static_cast<int>(parse_integer(v->first, v->second));
    if (auto v = take(sec, "L"))
      g.L_list = {static_cast<int>(parse_integer(v->first, v->second))};
    if (auto v = take(sec, "L_list")) {
      for (const auto& tok : tokenize(v->first))
        g.L_list.push_back(static_cast<int>(parse_integer(tok, v->second)));
    }
    if (auto v = take(sec, "nucleus_mode")) {
      if (v->first == "smeared")
        g.nucleus_mode = NucleusMode::smeared;
      else if (v->first == "point")
        g.nucleus_mode = NucleusMode::point;
      else
        throw ConfigError("nucleus_mode must be smeared or point", v->second);
    }
    reject_leftovers("grid", sec);
    if (g.L_list.empty())
      throw ConfigError("grid section needs L or L_list");
    if (g.points_per_unit < 1)
      throw ConfigError("points_per_unit must be positive");
    cfg.grid = g;
  }

  if (raw.entries.count("solver")) {
    auto& sec = raw.entries["solver"];
    SolverConfig s;
    if (auto v = take(sec, "tol")) s.tol = parse_number(v->first, v->second);
    if (auto v = take(sec, "max_iter"))
      s.max_iter = static_cast<int>(parse_integer(v->first, v->second));
    if (auto v = take(sec, "energy_tol"))
      s.energy_tol = parse_number(v->first, v->second);
    if (auto v = take(sec, "step_init"))
      s.step_init = parse_number(v->first, v->second);
    reject_leftovers("solver", sec);
    cfg.solver = s;
  }

  if (raw.entries.count("selection")) {
    auto& sec = raw.entries["selection"];
    SelectionConfig s;
    if (auto v = take(sec, "delta")) s.delta = parse_number(v->first, v->second);
    if (auto v = take(sec, "mode")) {
      if (v->first == "raw")
        s.mode = CriterionMode::raw;
      else if (v->first == "standardized")
        s.mode = CriterionMode::standardized;
      else
        throw ConfigError("criterion mode must be raw or standardized",
                          v->second);
    }
    if (auto v = take(sec, "descriptors"))
      s.descriptors = parse_descriptors(v->first, v->second);
    if (auto v = take(sec, "plain_budget"))
      s.plain_budget = parse_integer(v->first, v->second);
    if (auto v = take(sec, "selected_budget"))
      s.selected_budget = parse_integer(v->first, v->second);
    if (auto v = take(sec, "pilot_count"))
      s.pilot_count = parse_integer(v->first, v->second);
    if (auto v = take(sec, "candidate_cap"))
      s.candidate_cap = parse_integer(v->first, v->second);
    reject_leftovers("selection", sec);
    if (s.descriptors.empty())
      throw ConfigError("selection section needs descriptors");
    if (s.delta < 0.0 || s.delta > 1.0)
      throw ConfigError("selection delta must lie in [0, 1]");
    cfg.selection = s;
  }

  if (raw.entries.count("perturbation")) {
    auto& sec = raw.entries["perturbation"];
    PerturbationConfig p;
    if (auto v = take(sec, "site_edit")) {
      // site_edit = z0 z1 z2 => species (repeatable via ';')
      std::istringstream parts(v->first);
      std::string chunk;
      std::vector<std::string> chunks;
      while (std::getline(parts, chunk, ';')) chunks.push_back(chunk);
      for (const auto& c : chunks) {
        const auto arrow = c.find("=>");
        if (arrow == std::string::npos)
          throw ConfigError("site_edit needs 'coords => species'", v->second);
        const auto coords = tokenize(c.substr(0, arrow));
        SiteEdit e;
        for (std::size_t a = 0; a < coords.size() && a < 3; ++a)
          e.site[static_cast<int>(a)] =
              static_cast<int>(parse_integer(coords[a], v->second));
        e.new_species =
            static_cast<int>(parse_integer(c.substr(arrow + 2), v->second));
        p.site_edits.push_back(e);
      }
    }
    if (auto v = take(sec, "region_edit")) {
      std::istringstream parts(v->first);
      std::string chunk;
      while (std::getline(parts, chunk, ';')) {
        const auto arrow = chunk.find("=>");
        if (arrow == std::string::npos)
          throw ConfigError("region_edit needs 'lo hi => value'", v->second);
        const auto nums = tokenize(chunk.substr(0, arrow));
        if (nums.size() % 2 != 0 || nums.empty() || nums.size() > 6)
          throw ConfigError("region_edit needs lo and hi per axis", v->second);
        RegionEdit e;
        const std::size_t d = nums.size() / 2;
        for (std::size_t a = 0; a < d; ++a) {
          e.region.lo[static_cast<int>(a)] = parse_number(nums[a], v->second);
          e.region.hi[static_cast<int>(a)] =
              parse_number(nums[d + a], v->second);
        }
        e.new_background =
            parse_number(chunk.substr(arrow + 2), v->second);
        p.region_edits.push_back(e);
      }
    }
    if (auto v = take(sec, "gamma"))
      p.gamma = parse_number(v->first, v->second);
    if (auto v = take(sec, "shell_width"))
      p.shell_width = parse_number(v->first, v->second);
    reject_leftovers("perturbation", sec);
    cfg.perturbation = p;
  }

  if (raw.entries.count("output")) {
    auto& sec = raw.entries["output"];
    if (auto v = take(sec, "directory")) cfg.output.directory = v->first;
    if (auto v = take(sec, "formats")) {
      cfg.output.csv = false;
      cfg.output.json = false;
      for (const auto& tok : tokenize(v->first)) {
        if (tok == "csv") cfg.output.csv = true;
        else if (tok == "json") cfg.output.json = true;
        else throw ConfigError("unknown output format '" + tok + "'", v->second);
      }
    }
    if (auto v = take(sec, "svg"))
      cfg.output.svg = parse_bool(v->first, v->second);
    reject_leftovers("output", sec);
  }

  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json provenance(const ExperimentConfig& cfg) {
  json p;
  p["artifact"] = "tfwlab 0.1.0";
  p["config_hash"] = cfg.config_hash;
  p["seed"] = cfg.seed;
  p["timestamp"] = iso_timestamp();
  return p;
}

void require_sections(const ExperimentConfig& cfg, bool selection,
                      bool perturbation) {
  if (!cfg.ensemble) throw ConfigError("missing [ensemble] section");
  if (!cfg.grid) throw ConfigError("missing [grid] section");
  if (!cfg.solver) throw ConfigError("missing [solver] section");
  if (selection && !cfg.selection)
    throw ConfigError("missing [selection] section");
  if (perturbation && !cfg.perturbation)
    throw ConfigError("missing [perturbation] section");
}

std::filesystem::path ensure_outdir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output.directory);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_stream_csv(const std::string& path, const RunStream& stream,
                      const std::vector<Descriptor>& descriptors,
                      const ExperimentConfig& cfg) {
  CsvWriter csv(path);
  csv.comment("artifact=tfwlab 0.1.0 config_hash=" +
              std::to_string(cfg.config_hash) +
              " seed=" + std::to_string(cfg.seed));
  std::vector<std::string> header = {"candidate_index", "accepted", "E"};
  for (const auto& d : descriptors) header.push_back("F_" + d.tag());
  header.push_back("solver_iters");
  csv.row(header);
  std::vector<SampleRecord> rows = stream.records;
  rows.insert(rows.end(), stream.rejected.begin(), stream.rejected.end());
  std::sort(rows.begin(), rows.end(),
            [](const SampleRecord& a, const SampleRecord& b) {
              return a.index < b.index;
            });
  for (const auto& r : rows) {
    std::vector<std::string> cells = {std::to_string(r.index),
                                      r.accepted ? "1" : "0",
                                      r.accepted ? format_double(r.energy)
                                                 : ""};
    for (double f : r.stats) cells.push_back(format_double(f));
    cells.push_back(std::to_string(r.iterations));
    csv.row(cells);
  }
}

json report_to_json(const RunReport& report) {
  json j;
  j["per_L"] = json::array();
  for (const auto& lr : report.per_L) {
    json e;
    e["L"] = lr.L;
    e["plain"] = {{"count", lr.plain_count},
                  {"mean", lr.plain_mean},
                  {"variance", lr.plain_var}};
    e["selected"] = {{"count", lr.selected_count},
                     {"mean", lr.selected_mean},
                     {"variance", lr.selected_var},
                     {"candidates", lr.candidates},
                     {"solves", lr.selected_solves},
                     {"acceptance_rate", lr.acceptance_rate}};
    e["degenerate_variance"] = lr.degenerate_variance;
    e["delta_range_warning"] = lr.delta_range_warning;
    e["checks_run"] = lr.checks_run;
    if (lr.checks_run) {
      e["correlation"] = {
          {"explained_fraction", lr.correlation.explained_fraction},
          {"condition_number", lr.correlation.condition_number},
          {"r_var", lr.correlation.r_var},
          {"samples", lr.correlation.samples},
          {"pseudo_inverse_used", lr.correlation.pseudo_inverse_used}};
      e["variance_check"] = {{"ratio", lr.variance_check.ratio},
                             {"bound", lr.variance_check.bound},
                             {"se_ratio", lr.variance_check.se_ratio},
                             {"se_bound", lr.variance_check.se_bound},
                             {"pass", lr.variance_check.pass},
                             {"strict_pass", lr.variance_check.strict_pass}};
      e["mean_shift_check"] = {{"shift", lr.shift_check.shift},
                               {"se_combined", lr.shift_check.se_combined},
                               {"pass", lr.shift_check.pass}};
    }
    j["per_L"].push_back(e);
  }
  if (report.clt) {
    j["clt"] = {{"slope", report.clt->slope},
                {"slope_se", report.clt->slope_se}};
    j["clt"]["variances"] = json::array();
    for (const auto& [L, v] : report.clt->variances)
      j["clt"]["variances"].push_back({{"L", L}, {"var", v}});
  }
  return j;
}

}  // namespace

int cmd_solve(const std::string& config_path,
              std::optional<std::uint64_t> seed_override, bool verbose) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
    require_sections(cfg, false, false);
  } catch (const TfwError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 1;
  }
  if (seed_override) cfg.seed = *seed_override;
  const auto dir = ensure_outdir(cfg);

  try {
    const int L = cfg.grid->L_list.front();
    PeriodicSample sample = sample_periodic(*cfg.ensemble, L, cfg.seed);
    GridSpec grid = make_grid(sample, cfg.grid->points_per_unit * L);
    ChargeDistribution m = realize_charges(sample, grid);
    SolverConfig solver = *cfg.solver;
    solver.keep_log = true;
    TFWSolution sol = solve_tfw(m, solver);

    write_field(sol.u, (dir / "solution_u.bin").string());
    write_field(sol.phi, (dir / "solution_phi.bin").string());
    if (verbose || true) {
      CsvWriter log((dir / "iterations.csv").string());
      log.comment("artifact=tfwlab 0.1.0 config_hash=" +
                  std::to_string(cfg.config_hash) +
                  " seed=" + std::to_string(cfg.seed));
      log.row({"iter", "energy", "residual", "step"});
      for (const auto& r : sol.log)
        log.row({std::to_string(r.iter), format_double(r.energy),
                 format_double(r.residual), format_double(r.step)});
    }

    json out;
    out["provenance"] = provenance(cfg);
    out["converged"] = sol.converged;
    out["iterations"] = sol.iterations;
    out["residual"] = sol.residual;
    out["theta"] = sol.theta;
    if (sol.converged) {
      EnergyBreakdown e = energy_rve(sol, m, cfg.grid->nucleus_mode);
      out["energy"] = {{"kinetic", e.kinetic},
                       {"tf", e.tf},
                       {"coulomb_cont", e.coulomb_cont},
                       {"coulomb_point", e.coulomb_point},
                       {"total", e.total},
                       {"per_volume", e.per_volume},
                       {"mode", e.mode == NucleusMode::point ? "point"
                                                             : "smeared"},
                       {"sigma", e.sigma},
                       {"grid_n", e.grid_n}};
    }
    write_text_file((dir / "energy.json").string(), out.dump(2) + "\n");
    if (!sol.converged) {
      std::fprintf(stderr, "solver did not converge: residual %.3e after %d iterations\n",
                   sol.residual, sol.iterations);
      return 2;
    }
  } catch (const TfwError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}

int cmd_mc(const std::string& config_path,
           std::optional<std::uint64_t> seed_override, bool verbose) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
    require_sections(cfg, true, false);
  } catch (const TfwError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 1;
  }
  if (seed_override) cfg.seed = *seed_override;
  const auto dir = ensure_outdir(cfg);

  try {
    SelectionConfig sel = *cfg.selection;
    sel.seed = cfg.seed;
    sel.L_list = cfg.grid->L_list;
    sel.record_rejected = cfg.output.csv;

    RunReport report = run_mc_experiment(*cfg.ensemble, cfg.grid->points_per_unit,
                                         *cfg.solver, cfg.grid->nucleus_mode,
                                         sel);
    if (cfg.output.csv) {
      for (const auto& lr : report.per_L) {
        write_stream_csv(
            (dir / ("plain_L" + std::to_string(lr.L) + ".csv")).string(),
            lr.plain_stream, sel.descriptors, cfg);
        write_stream_csv(
            (dir / ("selected_L" + std::to_string(lr.L) + ".csv")).string(),
            lr.selected_stream, sel.descriptors, cfg);
      }
    }

    json out;
    out["provenance"] = provenance(cfg);
    out["report"] = report_to_json(report);
    bool any_degenerate = false;
    for (const auto& lr : report.per_L)
      any_degenerate = any_degenerate || lr.degenerate_variance;
    out["warnings"] = json::array();
    if (any_degenerate)
      out["warnings"].push_back(
          "degenerate variance: the plain stream is constant");
    write_text_file((dir / "report.json").string(), out.dump(2) + "\n");

    if (cfg.output.svg && report.clt) {
      SvgSeries s;
      s.label = "Var E_RVE(L)";
      for (const auto& [L, v] : report.clt->variances)
        s.points.emplace_back(static_cast<double>(L), v);
      write_svg_chart((dir / "variance_vs_L.svg").string(),
                      "variance vs L", {s}, true);
    }
    if (verbose && any_degenerate)
      std::fprintf(stderr, "warning: degenerate variance in at least one stream\n");
  } catch (const SelectionStarvation& err) {
    std::fprintf(stderr, "selection starved: %s\n", err.what());
    return 3;
  } catch (const TfwError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}

int cmd_locality(const std::string& config_path,
                 std::optional<std::uint64_t> seed_override, bool verbose) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
    require_sections(cfg, false, true);
  } catch (const TfwError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 1;
  }
  if (seed_override) cfg.seed = *seed_override;
  const auto dir = ensure_outdir(cfg);

  try {
    const int L = cfg.grid->L_list.front();
    PerturbationSpec pspec;
    pspec.base = sample_periodic(*cfg.ensemble, L, cfg.seed);
    pspec.site_edits = cfg.perturbation->site_edits;
    pspec.region_edits = cfg.perturbation->region_edits;
    PerturbationResult res = perturb_and_solve(
        pspec, cfg.grid->points_per_unit * L, *cfg.solver);

    const double width = cfg.perturbation->shell_width;
    auto shells_w = shell_profile(res.w, res.center, width);
    auto shells_psi = shell_profile(res.psi, res.center, width);
    {
      CsvWriter csv((dir / "decay_w.csv").string());
      csv.comment("artifact=tfwlab 0.1.0 config_hash=" +
                  std::to_string(cfg.config_hash) +
                  " seed=" + std::to_string(cfg.seed));
      csv.row({"radius", "l2", "max"});
      for (const auto& s : shells_w)
        csv.row({format_double(s.radius), format_double(s.l2),
                 format_double(s.max_abs)});
      CsvWriter csv2((dir / "decay_psi.csv").string());
      csv2.row({"radius", "l2", "max"});
      for (const auto& s : shells_psi)
        csv2.row({format_double(s.radius), format_double(s.l2),
                  format_double(s.max_abs)});
    }

    json out;
    out["provenance"] = provenance(cfg);
    const double cell_min = res.w.grid.cell(0, 0);
    const double max_r = 0.5 * cell_min - 1.0;
    try {
      DecayFit fit = decay_fit_shells(shells_w, 1e-12, max_r);
      out["fit_w"] = {{"gamma", fit.gamma},
                      {"intercept", fit.intercept},
                      {"r_squared", fit.r_squared},
                      {"points_used", fit.points_used},
                      {"no_decay", fit.no_decay}};
    } catch (const TooFewShells&) {
      out["fit_w"] = {{"no_signal", true}};
    }
    try {
      DecayFit fit = decay_fit_shells(shells_psi, 1e-12, max_r);
      out["fit_psi"] = {{"gamma", fit.gamma},
                        {"r_squared", fit.r_squared},
                        {"no_decay", fit.no_decay}};
    } catch (const TooFewShells&) {
      out["fit_psi"] = {{"no_signal", true}};
    }

    // weighted-norm report with the cutoff around charge-difference points
    CutoffEta eta{pspec.base.spec.rho_sep, res.charge_diff_points};
    ScalarField dmc(res.m_base.grid);
    for (std::size_t i = 0; i < dmc.size(); ++i)
      dmc[i] = res.m_edited.background[i] - res.m_base.background[i];
    WeightedNormReport wn = weighted_norm(res.w, res.psi, eta,
                                          cfg.perturbation->gamma, res.center,
                                          dmc);
    out["weighted_norm"] = {{"lhs", wn.lhs},
                            {"rhs", wn.rhs},
                            {"gamma", cfg.perturbation->gamma}};

    auto windows = window_decay_study(res, cfg.grid->nucleus_mode);
    {
      CsvWriter csv((dir / "window_decay.csv").string());
      csv.row({"distance", "abs_energy_difference"});
      for (const auto& [d, v] : windows)
        csv.row({format_double(d), format_double(v)});
    }
    write_text_file((dir / "locality.json").string(), out.dump(2) + "\n");

    if (cfg.output.svg) {
      SvgSeries sw{"shell L2 of w", {}};
      for (const auto& s : shells_w)
        if (s.l2 > 0) sw.points.emplace_back(s.radius, s.l2);
      write_svg_chart((dir / "decay_w.svg").string(), "decay of w", {sw}, true);
    }
    (void)verbose;
  } catch (const TfwError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}

}  // namespace tfw

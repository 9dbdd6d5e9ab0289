#include "tfwlab/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tfwlab/parallel.hpp"
#include "tfwlab/rng.hpp"

namespace tfw {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Bootstrap standard error of a statistic of one sample vector.
template <typename Stat>
double bootstrap_se(const std::vector<double>& data, Stat&& stat,
                    std::uint64_t seed, int resamples = 1000) {
  if (data.size() < 2) return 0.0;
  Rng rng(seed);
  std::vector<double> draw(data.size());
  std::vector<double> values;
  values.reserve(resamples);
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < data.size(); ++i)
      draw[i] = data[rng.index(data.size())];
    values.push_back(stat(draw));
  }
  return std::sqrt(variance_of(values));
}

// Bootstrap standard error of |rho|^2 over paired (E, F) rows.
double bootstrap_se_explained(const std::vector<double>& energies,
                              const std::vector<std::vector<double>>& stats,
                              int L, int dim, std::uint64_t seed,
                              int resamples = 1000) {
  const std::size_t n = energies.size();
  const std::size_t N = stats.empty() ? 0 : stats.front().size();
  if (n < N + 2) return 0.0;
  Rng rng(seed);
  std::vector<double> e(n);
  std::vector<std::vector<double>> f(n);
  std::vector<double> values;
  values.reserve(resamples);
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = rng.index(n);
      e[i] = energies[j];
      f[i] = stats[j];
    }
    try {
      values.push_back(correlation_report(e, f, L, dim).explained_fraction);
    } catch (const TfwError&) {
      // resample happened to be degenerate; skip
    }
  }
  return values.size() >= 2 ? std::sqrt(variance_of(values)) : 0.0;
}

SampleRecord evaluate_candidate(const ExperimentSetup& setup,
                                const std::vector<Descriptor>& descriptors,
                                std::uint64_t candidate_seed,
                                std::uint64_t index) {
  SampleRecord rec;
  rec.index = index;
  PeriodicSample sample =
      sample_periodic(setup.spec, setup.L, candidate_seed);
  rec.stats = eval_stats(sample, descriptors);
  ChargeDistribution m =
      realize_charges(sample, make_grid(sample, setup.grid_n));
  TFWSolution sol = solve_tfw(m, setup.solver);
  rec.iterations = sol.iterations;
  rec.converged = sol.converged;
  if (sol.converged) {
    rec.energy = energy_rve(sol, m, setup.mode).per_volume;
  } else {
    rec.energy = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

}  // namespace

void SelectionConfig::validate() const {
  if (delta < 0.0 || delta > 1.0)
    throw InvalidInput("selection delta must lie in [0, 1]");
  if (descriptors.empty())
    throw InvalidInput("selection requires at least one statistic");
  if (candidate_cap < 1) throw InvalidInput("candidate cap must be positive");
}

StatLaw stat_law(const EnsembleSpec& spec, int L,
                 const std::vector<Descriptor>& descriptors,
                 CriterionMode mode, long pilot_count, std::uint64_t seed) {
  StatLaw law;
  law.mean = expected_stats(spec, descriptors);
  law.mean_source = ExpectationSource::analytic;
  law.sd.assign(descriptors.size(), 0.0);
  bool need_pilot = false;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (auto sd = analytic_stat_sd(spec, descriptors[i], L)) {
      law.sd[i] = *sd;
    } else if (mode == CriterionMode::standardized) {
      need_pilot = true;
    }
  }
  if (need_pilot) {
    if (pilot_count < 2) throw InvalidInput("pilot count must be at least 2");
    const std::uint64_t pilot_seed = derive_seed(seed, 0x70696c6f74ULL);
    std::vector<std::vector<double>> rows(pilot_count);
    for (long i = 0; i < pilot_count; ++i) {
      PeriodicSample s =
          sample_periodic(spec, L, derive_seed(pilot_seed, i));
      rows[i] = eval_stats(s, descriptors);
    }
    law.sd_source = ExpectationSource::pilot;
    for (std::size_t j = 0; j < descriptors.size(); ++j) {
      if (analytic_stat_sd(spec, descriptors[j], L)) continue;
      std::vector<double> col(pilot_count);
      for (long i = 0; i < pilot_count; ++i) col[i] = rows[i][j];
      law.sd[j] = std::sqrt(variance_of(col));
    }
  }
  return law;
}

bool selection_accepts(const std::vector<double>& stats, const StatLaw& law,
                       double delta, CriterionMode mode, int L, int dim) {
  if (stats.size() != law.mean.size())
    throw InvalidInput("statistic vector does not match the law");
  const double raw_threshold =
      delta * std::pow(static_cast<double>(L), -0.5 * dim);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double dev = std::abs(stats[i] - law.mean[i]);
    const double threshold =
        mode == CriterionMode::raw ? raw_threshold : delta * law.sd[i];
    if (dev > threshold) return false;
  }
  return true;
}

std::vector<double> RunStream::energies() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records)
    if (r.converged) out.push_back(r.energy);
  return out;
}

std::vector<std::vector<double>> RunStream::stat_rows() const {
  std::vector<std::vector<double>> out;
  out.reserve(records.size());
  for (const auto& r : records)
    if (r.converged) out.push_back(r.stats);
  return out;
}

RunStream run_plain(const ExperimentSetup& setup,
                    const std::vector<Descriptor>& descriptors, long budget,
                    std::uint64_t seed) {
  if (budget < 2) throw InvalidInput("plain run needs a budget of >= 2");
  RunStream stream;
  stream.records.resize(budget);
  stream.candidates = budget;
  parallel_for_index(budget, worker_count(), [&](long i) {
    stream.records[i] = evaluate_candidate(
        setup, descriptors, derive_seed(seed, i), i);
  });
  stream.solves = budget;
  for (const auto& r : stream.records) stream.failures += !r.converged;
  return stream;
}

RunStream run_selected(const ExperimentSetup& setup, const SelectionConfig& cfg,
                       const StatLaw& law, std::uint64_t seed) {
  cfg.validate();
  if (cfg.selected_budget < 1)
    throw InvalidInput("selected run needs a budget of >= 1");
  const int dim = setup.spec.lattice.dim;
  RunStream stream;
  const long chunk = std::max<long>(64, 8L * worker_count());
  long next_index = 0;

  while (static_cast<long>(stream.records.size()) < cfg.selected_budget &&
         next_index < cfg.candidate_cap) {
    const long count =
        std::min(chunk, cfg.candidate_cap - next_index);
    // phase 1: statistics only (cheap, no PDE solve)
    std::vector<std::vector<double>> stats(count);
    parallel_for_index(count, worker_count(), [&](long i) {
      PeriodicSample s = sample_periodic(
          setup.spec, setup.L, derive_seed(seed, next_index + i));
      stats[i] = eval_stats(s, cfg.descriptors);
    });
    // phase 2: consume candidates in index order until the budget is met
    std::vector<long> accepted;
    long consumed = count;
    for (long i = 0; i < count; ++i) {
      if (selection_accepts(stats[i], law, cfg.delta, cfg.mode, setup.L, dim)) {
        accepted.push_back(i);
        if (static_cast<long>(stream.records.size()) +
                static_cast<long>(accepted.size()) >=
            cfg.selected_budget) {
          consumed = i + 1;
          break;
        }
      } else if (cfg.record_rejected) {
        SampleRecord rec;
        rec.index = static_cast<std::uint64_t>(next_index + i);
        rec.stats = stats[i];
        rec.energy = std::numeric_limits<double>::quiet_NaN();
        rec.accepted = false;
        stream.rejected.push_back(std::move(rec));
      }
    }
    std::vector<SampleRecord> solved(accepted.size());
    parallel_for_index(static_cast<long>(accepted.size()), worker_count(),
                       [&](long j) {
                         const long i = accepted[j];
                         solved[j] = evaluate_candidate(
                             setup, cfg.descriptors,
                             derive_seed(seed, next_index + i),
                             next_index + i);
                       });
    for (auto& rec : solved) {
      stream.failures += !rec.converged;
      stream.records.push_back(std::move(rec));
    }
    stream.solves += static_cast<long>(accepted.size());
    stream.candidates += consumed;
    next_index += consumed;
  }

  if (stream.records.empty())
    throw SelectionStarvation(
        "selection criterion accepted no candidate among " +
            std::to_string(stream.candidates) +
            "; consider a larger delta or the standardized mode",
        stream.candidates);
  return stream;
}

RateStudy selection_rate_study(const EnsembleSpec& spec, int L,
                               const SelectionConfig& cfg, const StatLaw& law,
                               long candidates, std::uint64_t seed) {
  RateStudy study;
  study.candidates = candidates;
  std::vector<char> hits(candidates, 0);
  parallel_for_index(candidates, worker_count(), [&](long i) {
    PeriodicSample s = sample_periodic(spec, L, derive_seed(seed, i));
    hits[i] = selection_accepts(eval_stats(s, cfg.descriptors), law, cfg.delta,
                                cfg.mode, L, spec.lattice.dim);
  });
  for (char h : hits) study.accepted += h;
  study.rate = candidates > 0
                   ? static_cast<double>(study.accepted) / candidates
                   : 0.0;
  return study;
}

VarianceReductionCheck variance_reduction_check(const RunStream& plain,
                                                const RunStream& selected,
                                                double delta, int L, int dim,
                                                std::uint64_t boot_seed) {
  const auto e_plain = plain.energies();
  const auto e_sel = selected.energies();
  if (e_plain.size() < 100 || e_sel.size() < 100)
    throw InvalidInput("variance check needs >= 100 samples per stream");
  VarianceReductionCheck check;
  const double var_plain = variance_of(e_plain);
  const double var_sel = variance_of(e_sel);
  if (var_plain <= 0.0) {
    check.degenerate = true;
    return check;
  }
  CorrelationReport rep =
      correlation_report(e_plain, plain.stat_rows(), L, dim);
  check.explained = rep.explained_fraction;
  check.ratio = var_sel / var_plain;
  check.bound = 1.0 - (1.0 - delta * delta) * rep.explained_fraction;

  const double se_vp = bootstrap_se(
      e_plain, [](const std::vector<double>& v) { return variance_of(v); },
      derive_seed(boot_seed, 1));
  const double se_vs = bootstrap_se(
      e_sel, [](const std::vector<double>& v) { return variance_of(v); },
      derive_seed(boot_seed, 2));
  // first-order propagation of independent stream errors to the ratio
  check.se_ratio = std::sqrt(
      (se_vs * se_vs) / (var_plain * var_plain) +
      (var_sel * var_sel) * (se_vp * se_vp) /
          (var_plain * var_plain * var_plain * var_plain));
  check.se_bound =
      (1.0 - delta * delta) *
      bootstrap_se_explained(e_plain, plain.stat_rows(), L, dim,
                             derive_seed(boot_seed, 3));
  const double combined =
      std::sqrt(check.se_ratio * check.se_ratio +
                check.se_bound * check.se_bound);
  check.pass = check.ratio <= check.bound + 3.0 * combined;
  check.strict_pass = check.ratio < 1.0 - 3.0 * check.se_ratio;
  return check;
}

MeanShiftCheck mean_shift_check(const RunStream& plain,
                                const RunStream& selected,
                                std::uint64_t boot_seed) {
  const auto e_plain = plain.energies();
  const auto e_sel = selected.energies();
  if (e_plain.size() < 100 || e_sel.size() < 100)
    throw InvalidInput("mean-shift check needs >= 100 samples per stream");
  MeanShiftCheck check;
  check.shift = mean_of(e_sel) - mean_of(e_plain);
  const double se_p = bootstrap_se(
      e_plain, [](const std::vector<double>& v) { return mean_of(v); },
      derive_seed(boot_seed, 4));
  const double se_s = bootstrap_se(
      e_sel, [](const std::vector<double>& v) { return mean_of(v); },
      derive_seed(boot_seed, 5));
  check.se_combined = std::sqrt(se_p * se_p + se_s * se_s);
  if (check.se_combined == 0.0) {
    check.degenerate = true;
    check.pass = std::abs(check.shift) == 0.0;
  } else {
    check.pass = std::abs(check.shift) <= 3.0 * check.se_combined;
  }
  return check;
}

CltFit fit_variance_slope(
    const std::vector<std::pair<int, std::vector<double>>>& energies_per_L) {
  if (energies_per_L.size() < 3)
    throw InvalidInput("CLT study needs at least 3 values of L");
  CltFit fit;
  std::vector<double> xs, ys;
  for (const auto& [L, es] : energies_per_L) {
    const double var = variance_of(es);
    if (var <= 0.0)
      throw DegenerateVariance("variance is zero at L = " + std::to_string(L) +
                               "; cannot fit a log-log slope");
    fit.variances.emplace_back(L, var);
    xs.push_back(std::log(static_cast<double>(L)));
    ys.push_back(std::log(var));
  }
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = my + fit.slope * (xs[i] - mx);
    ss_res += (ys[i] - pred) * (ys[i] - pred);
  }
  fit.slope_se =
      n > 2 ? std::sqrt(ss_res / (static_cast<double>(n) - 2.0) / sxx) : 0.0;
  return fit;
}

CltFit clt_scaling_study(const EnsembleSpec& spec, int points_per_unit,
                         const SolverConfig& solver, NucleusMode mode,
                         const std::vector<int>& L_list, long budget,
                         std::uint64_t seed) {
  std::vector<std::pair<int, std::vector<double>>> data;
  std::vector<Descriptor> none;
  for (int L : L_list) {
    ExperimentSetup setup{spec, L, points_per_unit * L, solver, mode};
    RunStream stream =
        run_plain(setup, none, budget, derive_seed(seed, L));
    data.emplace_back(L, stream.energies());
  }
  return fit_variance_slope(data);
}

std::vector<std::pair<double, double>> multilevel_remainder_diag(
    const PeriodicSample& sample, int grid_n, const SolverConfig& solver,
    const std::vector<double>& widths, NucleusMode mode) {
  GridSpec grid = make_grid(sample, grid_n);
  const int d = grid.dim;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (int a = 0; a < d; ++a) center[a] = 0.5 * grid.cell(a, a);
  const Box q1 = cube_at(center, 1.0, d);
  const Box cell = cell_box(grid);
  for (double w : widths)
    for (int a = 0; a < d; ++a)
      if (center[a] - 0.5 * w < cell.lo[a] - 1e-12 ||
          center[a] + 0.5 * w > cell.hi[a] + 1e-12)
        throw InvalidInput("remainder window exceeds the cell");

  ChargeDistribution m = realize_charges(sample, grid);
  TFWSolution base = solve_tfw(m, solver);
  const double e_base = windowed_energy(base, m, q1, mode);

  std::vector<std::pair<double, double>> out;
  for (double w : widths) {
    ChargeDistribution ext = restrict_extend(m, cube_at(center, w, d));
    TFWSolution sol = solve_tfw(ext, solver);
    const double e_ext = windowed_energy(sol, ext, q1, mode);
    out.emplace_back(w, std::abs(e_base - e_ext));
  }
  return out;
}

RunReport run_mc_experiment(const EnsembleSpec& spec, int points_per_unit,
                            const SolverConfig& solver, NucleusMode mode,
                            const SelectionConfig& cfg) {
  cfg.validate();
  if (cfg.L_list.empty()) throw InvalidInput("experiment needs an L list");
  RunReport report;
  std::vector<std::pair<int, std::vector<double>>> clt_data;
  for (int L : cfg.L_list) {
    ExperimentSetup setup{spec, L, points_per_unit * L, solver, mode};
    LRunReport lr;
    lr.L = L;
    lr.law = stat_law(spec, L, cfg.descriptors, cfg.mode, cfg.pilot_count,
                      cfg.seed);
    const std::uint64_t run_seed = derive_seed(cfg.seed, L);
    RunStream plain =
        run_plain(setup, cfg.descriptors, cfg.plain_budget, run_seed);
    RunStream selected = run_selected(setup, cfg, lr.law, run_seed);
    lr.plain_count = static_cast<long>(plain.energies().size());
    lr.selected_count = static_cast<long>(selected.energies().size());
    lr.candidates = selected.candidates;
    lr.selected_solves = selected.solves;
    lr.acceptance_rate =
        selected.candidates > 0
            ? static_cast<double>(selected.solves) / selected.candidates
            : 0.0;
    const auto pe = plain.energies();
    const auto se = selected.energies();
    lr.plain_mean = mean_of(pe);
    lr.plain_var = variance_of(pe);
    lr.selected_mean = mean_of(se);
    lr.selected_var = variance_of(se);
    // a constant stream accumulates roundoff of order eps^2 * mean^2
    const double var_floor =
        std::pow(1e-13 * (std::abs(lr.plain_mean) + 1.0), 2);
    lr.degenerate_variance = lr.plain_var <= var_floor;
    const double sites =
        std::pow(static_cast<double>(L), spec.lattice.dim);
    lr.delta_range_warning =
        std::pow(cfg.delta, static_cast<double>(cfg.descriptors.size())) <
        1.0 / std::sqrt(sites);
    if (!lr.degenerate_variance && pe.size() >= 100 && se.size() >= 100) {
      lr.correlation = correlation_report(pe, plain.stat_rows(), L,
                                          spec.lattice.dim);
      lr.variance_check = variance_reduction_check(
          plain, selected, cfg.delta, L, spec.lattice.dim,
          derive_seed(cfg.seed, 0xb007ULL + L));
      lr.shift_check = mean_shift_check(plain, selected,
                                        derive_seed(cfg.seed, 0x5217ULL + L));
      lr.checks_run = true;
    }
    clt_data.emplace_back(L, pe);
    lr.plain_stream = std::move(plain);
    lr.selected_stream = std::move(selected);
    report.per_L.push_back(std::move(lr));
  }
  if (clt_data.size() >= 3) {
    try {
      report.clt = fit_variance_slope(clt_data);
    } catch (const DegenerateVariance&) {
      report.clt.reset();
    }
  }
  return report;
}

}  // namespace tfw

#include "tfwlab/locality.hpp"

#include <algorithm>
#include <cmath>

namespace tfw {

namespace {

// Exact periodic distance from a point to an axis-aligned box (diagonal
// cells): per-axis minimum-image overhang beyond the half side.
double point_to_box_distance(const Eigen::Vector3d& p, const Box& box,
                             const GridSpec& grid) {
  double acc = 0.0;
  for (int a = 0; a < grid.dim; ++a) {
    const double period = grid.cell(a, a);
    const double center = 0.5 * (box.lo[a] + box.hi[a]);
    const double half = 0.5 * (box.hi[a] - box.lo[a]);
    const double delta = std::remainder(p[a] - center, period);
    const double over = std::max(0.0, std::abs(delta) - half);
    acc += over * over;
  }
  return std::sqrt(acc);
}

void apply_region_edit(ChargeDistribution& m, const RegionEdit& edit) {
  const int d = m.grid.dim;
  for (std::size_t i = 0; i < m.background.size(); ++i) {
    const Eigen::Vector3d x = m.grid.coord(i);
    if (!edit.region.contains(x, d)) continue;
    const double delta = edit.new_background - m.background[i];
    m.background[i] = edit.new_background;
    m.density[i] += delta;
  }
}

}  // namespace

PerturbationResult perturb_and_solve(const PerturbationSpec& pspec, int grid_n,
                                     const SolverConfig& cfg) {
  if (pspec.empty()) throw InvalidInput("perturbation has no edits");

  PeriodicSample edited = pspec.base;
  for (const auto& e : pspec.site_edits) {
    if (e.new_species < 0 ||
        e.new_species >= static_cast<int>(edited.spec.species.count()))
      throw InvalidInput("site edit uses an unknown species");
    edited.occupancy[edited.site_index(e.site)] = e.new_species;
  }

  PerturbationResult res;
  GridSpec grid = make_grid(pspec.base, grid_n);
  res.m_base = realize_charges(pspec.base, grid);
  res.m_edited = realize_charges(edited, grid);
  for (const auto& e : pspec.region_edits) apply_region_edit(res.m_edited, e);

  res.sol_base = solve_tfw(res.m_base, cfg);
  res.sol_edited = solve_tfw(res.m_edited, cfg);
  if (!res.sol_base.converged || !res.sol_edited.converged)
    throw SolverFailure("perturbation solve did not converge");

  res.w = ScalarField(grid);
  res.psi = ScalarField(grid);
  for (std::size_t i = 0; i < res.w.size(); ++i) {
    res.w[i] = res.sol_base.u[i] - res.sol_edited.u[i];
    res.psi[i] = res.sol_base.phi[i] - res.sol_edited.phi[i];
  }

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  std::size_t edits = 0;
  for (const auto& e : pspec.site_edits) {
    const std::size_t idx = pspec.base.site_index(e.site);
    const Eigen::Vector3d pos = pspec.base.site_position(idx);
    centroid += pos;
    ++edits;
    const double old_c =
        pspec.base.spec.species.entries[pspec.base.occupancy[idx]].charge;
    const double new_c = pspec.base.spec.species.entries[e.new_species].charge;
    if (old_c != new_c) res.charge_diff_points.push_back(pos);
  }
  for (const auto& e : pspec.region_edits) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (int a = 0; a < grid.dim; ++a)
      c[a] = 0.5 * (e.region.lo[a] + e.region.hi[a]);
    centroid += c;
    ++edits;
  }
  res.center = centroid / static_cast<double>(edits);
  return res;
}

DecayFit decay_fit(const std::vector<std::array<double, 3>>& points,
                   double floor) {
  DecayFit fit;
  fit.noise_floor = floor;
  std::vector<std::array<double, 3>> used;
  for (const auto& p : points)
    if (p[1] > floor && p[2] > 0.0) used.push_back(p);
  if (used.size() < 4)
    throw TooFewShells("decay fit needs at least 4 points above the floor, got " +
                       std::to_string(used.size()));
  fit.points_used = used.size();

  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (const auto& p : used) {
    const double y = std::log(p[1]);
    sw += p[2];
    swx += p[2] * p[0];
    swy += p[2] * y;
  }
  const double mx = swx / sw;
  const double my = swy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : used) {
    const double dx = p[0] - mx;
    const double dy = std::log(p[1]) - my;
    sxx += p[2] * dx * dx;
    sxy += p[2] * dx * dy;
    syy += p[2] * dy * dy;
  }
  const double slope = sxy / sxx;
  fit.gamma = -slope;
  fit.intercept = my - slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  fit.no_decay = fit.gamma <= 0.0 || fit.r_squared < 0.25;
  return fit;
}

DecayFit decay_fit_shells(const std::vector<ShellStat>& shells, double floor,
                          double max_radius) {
  std::vector<std::array<double, 3>> points;
  for (const auto& s : shells) {
    if (s.radius > max_radius || s.count == 0) continue;
    points.push_back({s.radius, s.l2, static_cast<double>(s.count)});
  }
  return decay_fit(points, floor);
}

WeightedNormReport weighted_norm(const ScalarField& w, const ScalarField& psi,
                                 const CutoffEta& eta, double gamma,
                                 const Eigen::Vector3d& y,
                                 const ScalarField& delta_mc) {
  if (gamma <= 0.0) throw InvalidInput("decay weight gamma must be positive");
  const GridSpec& grid = w.grid;
  if (!grid.same_layout(psi.grid) || !grid.same_layout(delta_mc.grid))
    throw InvalidInput("weighted_norm fields live on different grids");
  const int d = grid.dim;

  std::vector<ScalarField> grad_w = gradient(w);
  std::vector<ScalarField> grad_psi = gradient(psi);
  std::vector<ScalarField> hess_psi;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      hess_psi.push_back(second_derivative(psi, i, j));

  WeightedNormReport rep;
  const double quad = grid.quad_weight();
  for (std::size_t idx = 0; idx < w.size(); ++idx) {
    const Eigen::Vector3d x = grid.coord(idx);
    const double weight =
        std::exp(-2.0 * gamma * periodic_distance(x, y, grid));
    const double e = eta(x, grid);
    double gw2 = 0.0, gpsi2 = 0.0, hpsi2 = 0.0;
    for (int a = 0; a < d; ++a) {
      gw2 += grad_w[a][idx] * grad_w[a][idx];
      gpsi2 += grad_psi[a][idx] * grad_psi[a][idx];
    }
    for (const auto& h : hess_psi) hpsi2 += h[idx] * h[idx];
    const double lhs_density = w[idx] * w[idx] + gw2 + psi[idx] * psi[idx] +
                               e * gpsi2 + e * e * hpsi2;
    rep.lhs += lhs_density * weight;
    double rhs_density = delta_mc[idx] * delta_mc[idx];
    if (e < 1.0) rhs_density += w[idx] * w[idx] + psi[idx] * psi[idx];
    rep.rhs += rhs_density * weight;
  }
  rep.lhs *= quad;
  rep.rhs *= quad;
  return rep;
}

std::vector<std::pair<double, double>> window_decay_study(
    const PerturbationResult& result, NucleusMode mode) {
  const GridSpec& grid = result.m_base.grid;
  const int d = grid.dim;

  // support of delta m: edited sites plus region-edit boxes
  std::vector<Eigen::Vector3d> support = result.charge_diff_points;
  ScalarField dm(grid);
  for (std::size_t i = 0; i < dm.size(); ++i)
    dm[i] = result.m_edited.density[i] - result.m_base.density[i];
  if (support.empty()) {
    // fall back to the grid support of the density difference
    const double cap = 1e-12 * (linf_norm(dm) + 1e-300);
    for (std::size_t i = 0; i < dm.size(); ++i)
      if (std::abs(dm[i]) > cap) support.push_back(grid.coord(i));
  }
  if (support.empty()) support.push_back(result.center);

  std::vector<std::pair<double, double>> out;
  int tiles[3] = {1, 1, 1};
  for (int a = 0; a < d; ++a)
    tiles[a] = std::max(1, static_cast<int>(std::floor(grid.cell(a, a))));
  for (int t0 = 0; t0 < tiles[0]; ++t0) {
    for (int t1 = 0; t1 < tiles[1]; ++t1) {
      for (int t2 = 0; t2 < tiles[2]; ++t2) {
        Box q;
        const int t[3] = {t0, t1, t2};
        for (int a = 0; a < d; ++a) {
          q.lo[a] = static_cast<double>(t[a]);
          q.hi[a] = q.lo[a] + 1.0;
        }
        const double e1 =
            windowed_energy(result.sol_base, result.m_base, q, mode);
        const double e2 =
            windowed_energy(result.sol_edited, result.m_edited, q, mode);
        double dist = std::numeric_limits<double>::infinity();
        for (const auto& s : support)
          dist = std::min(dist, point_to_box_distance(s, q, grid));
        out.emplace_back(dist, std::abs(e1 - e2));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tfw

#include "tfwlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "tfwlab/rng.hpp"

namespace tfw {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

int pick_species(const SpeciesTable& table, double u) {
  double acc = 0.0;
  const int last = static_cast<int>(table.entries.size()) - 1;
  for (int k = 0; k <= last; ++k) {
    acc += table.entries[k].prob;
    if (u < acc) return k;
  }
  return last;  // guard against cumulative rounding
}

// Adds a periodic Gaussian of mass `charge` and width sigma centered at
// `pos`. Only a local patch of radius 8*sigma is touched; the tail beyond it
// is below 1e-13 of the mass.
void smear_nucleus(ScalarField& field, const Eigen::Vector3d& pos,
                   double charge, double sigma) {
  const GridSpec& g = field.grid;
  const int d = g.dim;
  const int n = g.n;
  Eigen::Vector3d frac = Eigen::Vector3d::Zero();
  frac.head(d) = g.cell.topLeftCorner(d, d).inverse() * pos.head(d);

  // patch half-width in grid steps per axis; displacements beyond one period
  // wrap and contribute as periodic images
  int half[3] = {0, 0, 0};
  for (int a = 0; a < d; ++a) {
    const double h = g.spacing(a);
    half[a] = static_cast<int>(std::ceil(8.0 * sigma / h)) + 1;
  }
  int center[3] = {0, 0, 0};
  for (int a = 0; a < d; ++a)
    center[a] = static_cast<int>(std::floor(frac[a] * n + 0.5));

  const double norm =
      charge / std::pow(2.0 * kPi * sigma * sigma, 0.5 * d);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  const int lo0 = (d >= 1) ? -half[0] : 0, hi0 = (d >= 1) ? half[0] : 0;
  const int lo1 = (d >= 2) ? -half[1] : 0, hi1 = (d >= 2) ? half[1] : 0;
  const int lo2 = (d >= 3) ? -half[2] : 0, hi2 = (d >= 3) ? half[2] : 0;
  for (int i0 = lo0; i0 <= hi0; ++i0) {
    for (int i1 = lo1; i1 <= hi1; ++i1) {
      for (int i2 = lo2; i2 <= hi2; ++i2) {
        int idx[3] = {center[0] + i0, center[1] + i1, center[2] + i2};
        Eigen::Vector3d fr = Eigen::Vector3d::Zero();
        std::size_t flat = 0;
        for (int a = 0; a < d; ++a) {
          int w = ((idx[a] % n) + n) % n;
          flat = flat * n + static_cast<std::size_t>(w);
          fr[a] = static_cast<double>(idx[a]) / n - frac[a];
        }
        const Eigen::Vector3d dx = g.cell * fr;
        const double r2 = dx.head(d).squaredNorm();
        field[flat] += norm * std::exp(-r2 * inv2s2);
      }
    }
  }
}

}  // namespace

void BravaisLattice::validate() const {
  if (dim < 1 || dim > 3) throw InvalidInput("lattice dimension must be 1..3");
  if (F.topLeftCorner(dim, dim).determinant() <= 0.0)
    throw InvalidInput("lattice matrix must have positive determinant");
}

double BravaisLattice::min_site_distance() const {
  double best = std::numeric_limits<double>::infinity();
  const int l0 = 2, l1 = (dim >= 2) ? 2 : 0, l2 = (dim >= 3) ? 2 : 0;
  for (int z0 = -l0; z0 <= l0; ++z0)
    for (int z1 = -l1; z1 <= l1; ++z1)
      for (int z2 = -l2; z2 <= l2; ++z2) {
        if (z0 == 0 && z1 == 0 && z2 == 0) continue;
        best = std::min(best, (F * Eigen::Vector3d(z0, z1, z2)).norm());
      }
  return best;
}

void SpeciesTable::validate() const {
  if (entries.empty()) return;  // background-only ensemble
  double sum = 0.0;
  for (const auto& s : entries) {
    if (s.charge <= 0.0) throw InvalidInput("species charge must be positive");
    if (s.prob < 0.0 || s.prob > 1.0)
      throw InvalidInput("species probability outside [0,1]");
    sum += s.prob;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw InvalidInput("species probabilities sum to " + std::to_string(sum) +
                       ", expected 1");
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (entries[i].charge == entries[j].charge)
        throw InvalidInput("species charges must be pairwise distinct");
}

void EnsembleSpec::validate() const {
  lattice.validate();
  species.validate();
  if (background < 0.0) throw InvalidInput("background density must be >= 0");
  if (has_nuclei()) {
    if (sigma <= 0.0) throw InvalidInput("smearing width must be positive");
    if (rho_sep <= 0.0) throw InvalidInput("separation radius must be positive");
    if (sigma > rho_sep)
      throw InvalidInput("smearing width exceeds separation radius");
    if (4.0 * rho_sep > lattice.min_site_distance() + 1e-12)
      throw InvalidInput("4*rho_sep exceeds the minimal site distance");
  } else if (background <= 0.0) {
    throw InvalidInput("ensemble carries no charge at all");
  }
}

std::size_t PeriodicSample::site_index(const Eigen::Vector3i& z) const {
  std::size_t flat = 0;
  for (int a = 0; a < spec.lattice.dim; ++a) {
    const int w = ((z[a] % L) + L) % L;
    flat = flat * static_cast<std::size_t>(L) + static_cast<std::size_t>(w);
  }
  return flat;
}

Eigen::Vector3i PeriodicSample::site_coords(std::size_t flat) const {
  Eigen::Vector3i z = Eigen::Vector3i::Zero();
  for (int a = spec.lattice.dim - 1; a >= 0; --a) {
    z[a] = static_cast<int>(flat % L);
    flat /= L;
  }
  return z;
}

Eigen::Vector3d PeriodicSample::site_position(std::size_t flat) const {
  return spec.lattice.F * site_coords(flat).cast<double>();
}

PeriodicSample sample_periodic(const EnsembleSpec& spec, int L,
                               std::uint64_t seed) {
  spec.validate();
  if (L < 2) throw InvalidInput("periodization needs L >= 2");
  PeriodicSample s;
  s.spec = spec;
  s.L = L;
  s.seed = seed;
  std::size_t sites = 1;
  for (int a = 0; a < spec.lattice.dim; ++a)
    sites *= static_cast<std::size_t>(L);
  s.occupancy.resize(sites, 0);
  if (spec.has_nuclei()) {
    for (std::size_t i = 0; i < sites; ++i)
      s.occupancy[i] = pick_species(spec.species, counter_uniform(seed, i));
  }
  return s;
}

PeriodicSample sample_from_occupancy(const EnsembleSpec& spec, int L,
                                     std::vector<int> occupancy) {
  spec.validate();
  if (L < 2) throw InvalidInput("periodization needs L >= 2");
  std::size_t sites = 1;
  for (int a = 0; a < spec.lattice.dim; ++a)
    sites *= static_cast<std::size_t>(L);
  if (occupancy.size() != sites)
    throw InvalidInput("occupancy size does not match L^dim");
  for (int v : occupancy)
    if (v < 0 || v >= static_cast<int>(spec.species.count()))
      throw InvalidInput("occupancy entry out of species range");
  PeriodicSample s;
  s.spec = spec;
  s.L = L;
  s.seed = 0;
  s.occupancy = std::move(occupancy);
  return s;
}

std::string sample_to_json(const PeriodicSample& s) {
  std::ostringstream os;
  os << "{\"L\":" << s.L << ",\"dim\":" << s.spec.lattice.dim
     << ",\"seed\":" << s.seed << ",\"occupancy\":[";
  for (std::size_t i = 0; i < s.occupancy.size(); ++i) {
    if (i) os << ',';
    os << s.occupancy[i];
  }
  os << "]}";
  return os.str();
}

GridSpec make_grid(const PeriodicSample& sample, int n) {
  Eigen::Matrix3d cell = Eigen::Matrix3d::Identity();
  const int d = sample.spec.lattice.dim;
  cell.topLeftCorner(d, d) =
      static_cast<double>(sample.L) * sample.spec.lattice.F.topLeftCorner(d, d);
  return GridSpec(d, n, cell);
}

ChargeDistribution realize_charges(const PeriodicSample& sample,
                                   const GridSpec& grid) {
  const EnsembleSpec& spec = sample.spec;
  const GridSpec expected = make_grid(sample, grid.n);
  if (!grid.same_layout(expected))
    throw InvalidInput("grid cell does not match L * F of the sample");
  ChargeDistribution m;
  m.grid = grid;
  m.background = ScalarField(grid, spec.background);
  m.density = ScalarField(grid, spec.background);
  m.sigma = spec.sigma;
  if (spec.has_nuclei()) {
    if (spec.sigma < 2.0 * grid.max_spacing())
      throw InvalidInput("under-resolved smearing: sigma < 2 grid spacings");
    for (std::size_t i = 0; i < sample.site_count(); ++i) {
      const int sp = sample.occupancy[i];
      Nucleus nuc;
      nuc.position = sample.site_position(i);
      nuc.charge = spec.species.entries[sp].charge;
      m.nuclei.push_back(nuc);
      smear_nucleus(m.density, nuc.position, nuc.charge, spec.sigma);
    }
  }
  return m;
}

bool Box::contains(const Eigen::Vector3d& x, int dim) const {
  for (int a = 0; a < dim; ++a)
    if (x[a] < lo[a] || x[a] >= hi[a]) return false;
  return true;
}

double Box::volume(int dim) const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= hi[a] - lo[a];
  return v;
}

Box cell_box(const GridSpec& grid) {
  Box b;
  for (int a = 0; a < grid.dim; ++a) b.hi[a] = grid.cell(a, a);
  // For non-diagonal cells the bounding description is approximate; windowed
  // operations are specified on rectangular cells.
  return b;
}

Box cube_at(const Eigen::Vector3d& center, double side, int dim) {
  Box b;
  for (int a = 0; a < dim; ++a) {
    b.lo[a] = center[a] - 0.5 * side;
    b.hi[a] = center[a] + 0.5 * side;
  }
  return b;
}

ChargeDistribution restrict_extend(const ChargeDistribution& m,
                                   const Box& window) {
  const int d = m.grid.dim;
  if (window.volume(d) <= 0.0) throw InvalidInput("empty window");
  const Box cell = cell_box(m.grid);
  for (int a = 0; a < d; ++a)
    if (window.lo[a] < cell.lo[a] - 1e-12 || window.hi[a] > cell.hi[a] + 1e-12)
      throw InvalidInput("window extends outside the period cell");

  ChargeDistribution out;
  out.grid = m.grid;
  out.sigma = m.sigma;
  out.background = ScalarField(m.grid);
  for (std::size_t i = 0; i < out.background.size(); ++i) {
    const Eigen::Vector3d x = m.grid.coord(i);
    out.background[i] = window.contains(x, d) ? m.background[i] : 1.0;
  }
  out.density = out.background;
  for (const auto& nuc : m.nuclei) {
    if (!window.contains(nuc.position, d)) continue;
    out.nuclei.push_back(nuc);
    smear_nucleus(out.density, nuc.position, nuc.charge, m.sigma);
  }
  return out;
}

namespace {

// Circular convolution of `f` with the sampled indicator of a periodic ball,
// evaluated by direct summation over the ball stencil. Grids used for the
// diagnostics are small; clarity over speed.
ScalarField ball_sum(const ScalarField& f, double radius) {
  const GridSpec& g = f.grid;
  const int d = g.dim;
  const int n = g.n;
  int span[3] = {0, 0, 0};
  for (int a = 0; a < d; ++a)
    span[a] = std::min(n / 2, static_cast<int>(std::ceil(radius / g.spacing(a))) + 1);
  std::vector<Eigen::Vector3i> stencil;
  const int l0 = span[0], l1 = (d >= 2) ? span[1] : 0, l2 = (d >= 3) ? span[2] : 0;
  for (int i0 = -l0; i0 <= l0; ++i0)
    for (int i1 = -l1; i1 <= l1; ++i1)
      for (int i2 = -l2; i2 <= l2; ++i2) {
        Eigen::Vector3d fr = Eigen::Vector3d::Zero();
        fr[0] = static_cast<double>(i0) / n;
        if (d >= 2) fr[1] = static_cast<double>(i1) / n;
        if (d >= 3) fr[2] = static_cast<double>(i2) / n;
        if ((g.cell * fr).head(d).norm() <= radius)
          stencil.emplace_back(i0, i1, i2);
      }
  ScalarField out(g);
  const double w = g.quad_weight();
  for (std::size_t i = 0; i < f.size(); ++i) {
    int idx[3] = {0, 0, 0};
    std::size_t rem = i;
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % n);
      rem /= n;
    }
    double acc = 0.0;
    for (const auto& s : stencil) {
      std::size_t flat = 0;
      for (int a = 0; a < d; ++a) {
        const int v = ((idx[a] + s[a]) % n + n) % n;
        flat = flat * n + static_cast<std::size_t>(v);
      }
      acc += f[flat];
    }
    out[i] = acc * w;
  }
  return out;
}

}  // namespace

AssumptionReport verify_assumptions(const ChargeDistribution& m,
                                    double rho_sep, double omega0) {
  AssumptionReport rep;
  rep.min_nucleus_separation = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.nuclei.size(); ++i)
    for (std::size_t j = i + 1; j < m.nuclei.size(); ++j)
      rep.min_nucleus_separation = std::min(
          rep.min_nucleus_separation,
          periodic_distance(m.nuclei[i].position, m.nuclei[j].position, m.grid));
  rep.separation_ok =
      m.nuclei.size() < 2 || rep.min_nucleus_separation >= 4.0 * rho_sep - 1e-12;

  rep.max_local_mass = field_max(ball_sum(m.density, 1.0));

  const double r1 = 1.0 / omega0;
  const double r2 = 2.0 / omega0;
  auto ball_avg_min = [&](double radius) {
    ScalarField sums = ball_sum(m.density, radius);
    // normalize by the discrete ball measure (count * quad weight per center;
    // the stencil is translation invariant, so compute it once)
    ScalarField ones(m.grid, 1.0);
    ScalarField meas = ball_sum(ones, radius);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sums.size(); ++i)
      best = std::min(best, sums[i] / meas[i]);
    return best;
  };
  rep.min_ball_average_r1 = ball_avg_min(r1);
  rep.min_ball_average_r2 = ball_avg_min(r2);
  rep.lower_bound_ok = rep.min_ball_average_r1 >= omega0 - 1e-12 &&
                       rep.min_ball_average_r2 >= omega0 - 1e-12;
  return rep;
}

}  // namespace tfw

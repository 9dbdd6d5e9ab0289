#include "tfwlab/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace tfw {

namespace {

void require_species(const PeriodicSample& s, int a) {
  if (a < 0 || a >= static_cast<int>(s.spec.species.count()))
    throw InvalidInput("unknown species index " + std::to_string(a));
}

double det_f(const EnsembleSpec& spec) {
  const int d = spec.lattice.dim;
  return spec.lattice.F.topLeftCorner(d, d).determinant();
}

}  // namespace

Descriptor Descriptor::species_of(int a) {
  Descriptor d;
  d.kind = Kind::species;
  d.a = a;
  return d;
}

Descriptor Descriptor::pair_of(int a, int b) {
  Descriptor d;
  d.kind = Kind::nn_pair;
  d.a = a;
  d.b = b;
  return d;
}

Descriptor Descriptor::motif_of(
    std::vector<std::pair<Eigen::Vector3i, int>> p) {
  Descriptor d;
  d.kind = Kind::motif;
  d.pattern = std::move(p);
  return d;
}

std::string Descriptor::tag() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::species:
      os << "species:" << a;
      break;
    case Kind::nn_pair:
      os << "pair:" << a << ":" << b;
      break;
    case Kind::motif:
      os << "motif";
      for (const auto& [off, sp] : pattern)
        os << ":(" << off[0] << "," << off[1] << "," << off[2] << ")=" << sp;
      break;
  }
  return os.str();
}

double species_density(const PeriodicSample& s, int a) {
  require_species(s, a);
  std::size_t count = 0;
  for (int v : s.occupancy) count += (v == a);
  return static_cast<double>(count) /
         (det_f(s.spec) * static_cast<double>(s.site_count()));
}

double nn_contact_density(const PeriodicSample& s, int a, int b) {
  require_species(s, a);
  require_species(s, b);
  const int d = s.spec.lattice.dim;
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.site_count(); ++i) {
    if (s.occupancy[i] != a) continue;
    const Eigen::Vector3i z = s.site_coords(i);
    bool hit = false;
    for (int axis = 0; axis < d && !hit; ++axis) {
      for (int dir = -1; dir <= 1 && !hit; dir += 2) {
        Eigen::Vector3i zn = z;
        zn[axis] += dir;
        hit = s.occupancy[s.site_index(zn)] == b;
      }
    }
    count += hit;
  }
  return static_cast<double>(count) /
         (det_f(s.spec) * static_cast<double>(s.site_count()));
}

double motif_density(
    const PeriodicSample& s,
    const std::vector<std::pair<Eigen::Vector3i, int>>& pattern) {
  if (pattern.empty()) throw InvalidInput("empty motif pattern");
  for (const auto& [off, sp] : pattern) {
    require_species(s, sp);
    for (int a = 0; a < s.spec.lattice.dim; ++a)
      if (std::abs(off[a]) > s.L / 2)
        throw InvalidInput("motif offset exceeds L/2");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.site_count(); ++i) {
    const Eigen::Vector3i z = s.site_coords(i);
    bool all = true;
    for (const auto& [off, sp] : pattern) {
      if (s.occupancy[s.site_index(z + off)] != sp) {
        all = false;
        break;
      }
    }
    count += all;
  }
  return static_cast<double>(count) /
         (det_f(s.spec) * static_cast<double>(s.site_count()));
}

std::vector<double> eval_stats(const PeriodicSample& s,
                               const std::vector<Descriptor>& descriptors) {
  std::vector<double> out;
  out.reserve(descriptors.size());
  for (const auto& d : descriptors) {
    switch (d.kind) {
      case Descriptor::Kind::species:
        out.push_back(species_density(s, d.a));
        break;
      case Descriptor::Kind::nn_pair:
        out.push_back(nn_contact_density(s, d.a, d.b));
        break;
      case Descriptor::Kind::motif:
        out.push_back(motif_density(s, d.pattern));
        break;
    }
  }
  return out;
}

std::vector<double> expected_stats(const EnsembleSpec& spec,
                                   const std::vector<Descriptor>& descriptors) {
  const double df = det_f(spec);
  const int d = spec.lattice.dim;
  auto prob = [&](int k) {
    if (k < 0 || k >= static_cast<int>(spec.species.count()))
      throw InvalidInput("unknown species index " + std::to_string(k));
    return spec.species.entries[k].prob;
  };
  std::vector<double> out;
  for (const auto& desc : descriptors) {
    switch (desc.kind) {
      case Descriptor::Kind::species:
        out.push_back(prob(desc.a) / df);
        break;
      case Descriptor::Kind::nn_pair: {
        const double pb = prob(desc.b);
        out.push_back(prob(desc.a) *
                      (1.0 - std::pow(1.0 - pb, 2.0 * d)) / df);
        break;
      }
      case Descriptor::Kind::motif: {
        // product law over distinct offsets; contradictory constraints on
        // one offset have probability zero
        std::map<std::array<int, 3>, int> constraint;
        double p = 1.0;
        bool contradictory = false;
        for (const auto& [off, sp] : desc.pattern) {
          std::array<int, 3> key = {off[0], off[1], off[2]};
          auto it = constraint.find(key);
          if (it == constraint.end()) {
            constraint[key] = sp;
            p *= prob(sp);
          } else if (it->second != sp) {
            contradictory = true;
          }
        }
        out.push_back(contradictory ? 0.0 : p / df);
        break;
      }
    }
  }
  return out;
}

std::optional<double> analytic_stat_sd(const EnsembleSpec& spec,
                                       const Descriptor& d, int L) {
  if (d.kind != Descriptor::Kind::species) return std::nullopt;
  const double p = spec.species.entries[d.a].prob;
  const double df = det_f(spec);
  double sites = 1.0;
  for (int a = 0; a < spec.lattice.dim; ++a) sites *= L;
  return std::sqrt(p * (1.0 - p) / sites) / df;
}

CorrelationReport correlation_report(
    const std::vector<double>& energies,
    const std::vector<std::vector<double>>& stats, int L, int dim) {
  const std::size_t n = energies.size();
  if (stats.size() != n)
    throw InvalidInput("energy/stat sample counts differ");
  const std::size_t N = n ? stats.front().size() : 0;
  if (n < N + 2)
    throw InvalidInput("correlation report needs at least N + 2 samples");

  CorrelationReport rep;
  rep.samples = n;
  rep.mean_energy = 0.0;
  for (double e : energies) rep.mean_energy += e;
  rep.mean_energy /= static_cast<double>(n);
  rep.mean_stats.assign(N, 0.0);
  for (const auto& f : stats)
    for (std::size_t j = 0; j < N; ++j) rep.mean_stats[j] += f[j];
  for (double& v : rep.mean_stats) v /= static_cast<double>(n);

  const double norm = 1.0 / static_cast<double>(n - 1);
  rep.var_energy = 0.0;
  rep.cov_energy_stats.assign(N, 0.0);
  rep.cov_stats.assign(N, std::vector<double>(N, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double de = energies[i] - rep.mean_energy;
    rep.var_energy += de * de;
    for (std::size_t j = 0; j < N; ++j) {
      const double dj = stats[i][j] - rep.mean_stats[j];
      rep.cov_energy_stats[j] += de * dj;
      for (std::size_t k = j; k < N; ++k)
        rep.cov_stats[j][k] += dj * (stats[i][k] - rep.mean_stats[k]);
    }
  }
  rep.var_energy *= norm;
  for (std::size_t j = 0; j < N; ++j) {
    rep.cov_energy_stats[j] *= norm;
    for (std::size_t k = j; k < N; ++k) {
      rep.cov_stats[j][k] *= norm;
      rep.cov_stats[k][j] = rep.cov_stats[j][k];
    }
  }

  double sites = 1.0;
  for (int a = 0; a < dim; ++a) sites *= L;
  rep.r_var = rep.var_energy > 0.0
                  ? 1.0 / (sites * rep.var_energy)
                  : std::numeric_limits<double>::infinity();

  for (std::size_t j = 0; j < N; ++j)
    if (rep.cov_stats[j][j] == 0.0) rep.degenerate_stats = true;

  if (N > 0) {
    // whiten per component so the quadratic form (scale invariant in exact
    // arithmetic) is evaluated on the correlation matrix
    Eigen::VectorXd scale(N);
    for (std::size_t j = 0; j < N; ++j)
      scale(j) = rep.cov_stats[j][j] > 0.0
                     ? 1.0 / std::sqrt(rep.cov_stats[j][j])
                     : 0.0;
    Eigen::MatrixXd covF(N, N);
    Eigen::VectorXd covEF(N);
    for (std::size_t j = 0; j < N; ++j) {
      covEF(j) = rep.cov_energy_stats[j] * scale(j);
      for (std::size_t k = 0; k < N; ++k)
        covF(j, k) = rep.cov_stats[j][k] * scale(j) * scale(k);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covF);
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    const double cutoff = 1e-12 * std::max(lmax, 1e-300);
    Eigen::VectorXd y = es.eigenvectors().transpose() * covEF;
    double quad = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      if (es.eigenvalues()(j) > cutoff) {
        quad += y(j) * y(j) / es.eigenvalues()(j);
      } else {
        rep.pseudo_inverse_used = true;
      }
    }
    rep.explained_fraction =
        rep.var_energy > 0.0 ? std::clamp(quad / rep.var_energy, 0.0, 1.0)
                             : 0.0;

    // kappa reports the raw (unwhitened) joint covariance conditioning
    Eigen::MatrixXd joint(N + 1, N + 1);
    joint(0, 0) = rep.var_energy;
    for (std::size_t j = 0; j < N; ++j) {
      joint(0, j + 1) = rep.cov_energy_stats[j];
      joint(j + 1, 0) = rep.cov_energy_stats[j];
      for (std::size_t k = 0; k < N; ++k)
        joint(j + 1, k + 1) = rep.cov_stats[j][k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> js(joint);
    const double jmin = js.eigenvalues().minCoeff();
    const double jmax = js.eigenvalues().maxCoeff();
    rep.condition_number = jmin > 0.0
                               ? jmax / jmin
                               : std::numeric_limits<double>::infinity();
  }
  return rep;
}

}  // namespace tfw

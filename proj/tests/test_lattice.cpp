#include <doctest.h>

#include <cmath>
#include <map>

#include "testutil.hpp"
#include "tfwlab/lattice.hpp"
#include "tfwlab/rng.hpp"

using namespace tfw;

namespace {

EnsembleSpec two_species_spec(int dim, double p0 = 0.5, double c0 = 1.0,
                              double c1 = 2.0) {
  EnsembleSpec spec;
  spec.lattice.dim = dim;
  spec.species.entries = {{c0, p0}, {c1, 1.0 - p0}};
  spec.sigma = 0.25;
  spec.rho_sep = 0.25;
  spec.background = 0.0;
  return spec;
}

EnsembleSpec background_spec(int dim, double density) {
  EnsembleSpec spec;
  spec.lattice.dim = dim;
  spec.background = density;
  spec.sigma = 0.0;
  return spec;
}

}  // namespace

TEST_CASE("species table validation") {
  SpeciesTable bad;
  bad.entries = {{1.0, 0.6}, {2.0, 0.6}};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad.entries = {{1.0, 0.5}, {1.0, 0.5}};  // duplicate charge
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad.entries = {{1.0, 0.5}, {2.0, 0.5 + 1e-15}};
  CHECK_NOTHROW(bad.validate());  // within the 1e-12 budget
}

TEST_CASE("ensemble validation enforces the separation inequality") {
  EnsembleSpec spec = two_species_spec(2);
  spec.rho_sep = 0.3;  // 4 * 0.3 > 1 = min site distance
  spec.sigma = 0.3;
  CHECK_THROWS_AS(spec.validate(), InvalidInput);
}

TEST_CASE("degenerate probability table: every site species 0") {
  EnsembleSpec spec = two_species_spec(2);
  spec.species.entries = {{1.0, 1.0}};
  PeriodicSample s = sample_periodic(spec, 4, 99);
  for (int v : s.occupancy) CHECK(v == 0);
}

TEST_CASE("sampling determinism: same inputs, bit-identical occupancy") {
  EnsembleSpec spec = two_species_spec(3);
  PeriodicSample a = sample_periodic(spec, 4, 1234);
  PeriodicSample b = sample_periodic(spec, 4, 1234);
  CHECK(a.occupancy == b.occupancy);
  PeriodicSample c = sample_periodic(spec, 4, 1235);
  CHECK(a.occupancy != c.occupancy);
}

TEST_CASE("sampling requires L >= 2 and a sane probability table") {
  EnsembleSpec spec = two_species_spec(2);
  CHECK_THROWS_AS(sample_periodic(spec, 1, 0), InvalidInput);
  spec.species.entries[0].prob = 0.4;  // sums to 0.9
  CHECK_THROWS_AS(sample_periodic(spec, 4, 0), InvalidInput);
}

TEST_CASE("empirical species frequency follows the binomial law") {
  // 1e4 samples of a 16^2 lattice: 3 sigma window around p = 1/2
  EnsembleSpec spec = two_species_spec(2);
  const int L = 16;
  const long samples = 10000;
  long count0 = 0, total = 0;
  for (long s = 0; s < samples; ++s) {
    PeriodicSample smp = sample_periodic(spec, L, derive_seed(42, s));
    for (int v : smp.occupancy) count0 += (v == 0);
    total += static_cast<long>(smp.occupancy.size());
  }
  const double freq = static_cast<double>(count0) / total;
  const double se = std::sqrt(0.25 / static_cast<double>(total));
  CHECK(std::abs(freq - 0.5) <= 3.0 * se);
}

TEST_CASE("periodization marginal law: contiguous pairs are product-law") {
  // L=4, d=1, 1e5 samples, chi-squared over the 4 outcomes of 2 sites
  EnsembleSpec spec = two_species_spec(1);
  const long samples = 100000;
  long counts[4] = {0, 0, 0, 0};
  for (long s = 0; s < samples; ++s) {
    PeriodicSample smp = sample_periodic(spec, 4, derive_seed(7, s));
    counts[2 * smp.occupancy[0] + smp.occupancy[1]] += 1;
  }
  const double expect = samples / 4.0;
  double chi2 = 0.0;
  for (long c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(testutil::chi2_pvalue(chi2, 3) > 0.001);
}

TEST_CASE("realize_charges: nuclei carry their nominal total mass") {
  EnsembleSpec spec = two_species_spec(3);
  spec.species.entries = {{1.0, 1.0}};
  PeriodicSample s = sample_from_occupancy(spec, 2, std::vector<int>(8, 0));
  GridSpec grid = make_grid(s, 16);
  ChargeDistribution m = realize_charges(s, grid);
  const double expected = static_cast<double>(s.site_count());
  CHECK(m.total_mass() == doctest::Approx(expected).epsilon(1e-10));
  CHECK(m.nuclei.size() == s.site_count());
}

TEST_CASE("realize_charges: background only gives the constant field") {
  EnsembleSpec spec = background_spec(2, 1.0);
  PeriodicSample s = sample_periodic(spec, 4, 0);
  ChargeDistribution m = realize_charges(s, make_grid(s, 32));
  CHECK(field_min(m.density) == 1.0);
  CHECK(field_max(m.density) == 1.0);
  CHECK(m.nuclei.empty());
}

TEST_CASE("realize_charges: under-resolved smearing is rejected") {
  EnsembleSpec spec = two_species_spec(2);
  spec.sigma = 0.05;  // grid below has h = 0.125 > sigma / 2
  PeriodicSample s = sample_periodic(spec, 4, 0);
  CHECK_THROWS_AS(realize_charges(s, make_grid(s, 32)), InvalidInput);
}

TEST_CASE("realize_charges: peak value matches the periodic Gaussian sum") {
  // sigma = 4h, charge c: peak = c (2 pi sigma^2)^{-d/2} up to images
  for (int dim : {1, 2, 3}) {
    EnsembleSpec spec = two_species_spec(dim);
    spec.species.entries = {{2.0, 1.0}};
    const int L = 2;
    const int n = 32;
    spec.sigma = 4.0 * (static_cast<double>(L) / n);
    PeriodicSample s =
        sample_from_occupancy(spec, L, std::vector<int>(1 << dim, 0));
    GridSpec grid = make_grid(s, n);
    ChargeDistribution m = realize_charges(s, grid);

    // oracle: direct summation over periodic images of every nucleus
    const double norm =
        2.0 / std::pow(2.0 * M_PI * spec.sigma * spec.sigma, 0.5 * dim);
    const Eigen::Vector3d site = Eigen::Vector3d::Zero();
    double oracle = 0.0;
    const int span = 3;
    for (int i0 = -span; i0 <= span; ++i0)
      for (int i1 = (dim >= 2 ? -span : 0); i1 <= (dim >= 2 ? span : 0); ++i1)
        for (int i2 = (dim >= 3 ? -span : 0); i2 <= (dim >= 3 ? span : 0);
             ++i2)
          for (const auto& nuc : m.nuclei) {
            Eigen::Vector3d image = nuc.position;
            image[0] += i0 * grid.cell(0, 0);
            if (dim >= 2) image[1] += i1 * grid.cell(1, 1);
            if (dim >= 3) image[2] += i2 * grid.cell(2, 2);
            oracle += nuc.charge /
                      std::pow(2.0 * M_PI * spec.sigma * spec.sigma, 0.5 * dim) *
                      std::exp(-(image - site).squaredNorm() /
                               (2.0 * spec.sigma * spec.sigma));
          }
    const double peak = m.density[0];  // site 0 sits on grid point 0
    CHECK(peak == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(std::abs(peak - norm) / norm < 0.01);
  }
}

TEST_CASE("charge conservation holds to 1e-10 for all sigma >= 2h") {
  EnsembleSpec spec = two_species_spec(2);
  const int L = 4;
  const int n = 64;
  const double h = static_cast<double>(L) / n;
  for (double sigma : {2.0 * h, 3.0 * h, 4.0 * h, 0.25}) {
    spec.sigma = sigma;
    PeriodicSample s = sample_periodic(spec, L, 5);
    ChargeDistribution m = realize_charges(s, make_grid(s, n));
    double expected = 0.0;
    for (const auto& nuc : m.nuclei) expected += nuc.charge;
    CHECK(m.total_mass() == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("restrict_extend: full window is the identity") {
  EnsembleSpec spec = two_species_spec(2);
  PeriodicSample s = sample_periodic(spec, 4, 11);
  ChargeDistribution m = realize_charges(s, make_grid(s, 32));
  ChargeDistribution r = restrict_extend(m, cell_box(m.grid));
  CHECK(r.nuclei.size() == m.nuclei.size());
  double err = 0.0;
  for (std::size_t i = 0; i < m.density.size(); ++i)
    err = std::max(err, std::abs(r.density[i] - m.density[i]));
  CHECK(err <= 1e-12);
}

TEST_CASE("restrict_extend: empty interior becomes 0 inside, 1 outside") {
  EnsembleSpec spec = two_species_spec(2);
  PeriodicSample s = sample_from_occupancy(spec, 4, std::vector<int>(16, 0));
  ChargeDistribution m = realize_charges(s, make_grid(s, 32));
  // window centered between sites, small enough to contain no nucleus
  Box w = cube_at(Eigen::Vector3d(2.5, 2.5, 0.0), 0.4, 2);
  ChargeDistribution r = restrict_extend(m, w);
  for (std::size_t i = 0; i < r.background.size(); ++i) {
    const Eigen::Vector3d x = m.grid.coord(i);
    if (w.contains(x, 2)) {
      CHECK(r.background[i] == 0.0);
    } else {
      CHECK(r.background[i] == 1.0);
    }
  }
  CHECK(r.nuclei.empty());
}

TEST_CASE("restrict_extend: half-cell mass equals inside mass plus outside volume") {
  EnsembleSpec spec = two_species_spec(2);
  spec.background = 0.3;
  PeriodicSample s = sample_periodic(spec, 4, 17);
  ChargeDistribution m = realize_charges(s, make_grid(s, 64));
  Box half;
  half.lo = Eigen::Vector3d::Zero();
  half.hi = Eigen::Vector3d(2.0, 4.0, 0.0);
  ChargeDistribution r = restrict_extend(m, half);

  // oracle by direct quadrature
  double inside_mass = 0.0;
  for (const auto& nuc : r.nuclei) inside_mass += nuc.charge;
  const double w = m.grid.quad_weight();
  double bg_inside = 0.0;
  std::size_t outside_points = 0;
  for (std::size_t i = 0; i < m.grid.size(); ++i) {
    if (half.contains(m.grid.coord(i), 2)) {
      bg_inside += m.background[i] * w;
    } else {
      ++outside_points;
    }
  }
  const double expected =
      inside_mass + bg_inside + static_cast<double>(outside_points) * w;
  CHECK(r.total_mass() == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("restrict_extend is idempotent") {
  EnsembleSpec spec = two_species_spec(2);
  spec.background = 0.2;
  PeriodicSample s = sample_periodic(spec, 4, 23);
  ChargeDistribution m = realize_charges(s, make_grid(s, 32));
  Box w = cube_at(Eigen::Vector3d(2.0, 2.0, 0.0), 2.5, 2);
  ChargeDistribution once = restrict_extend(m, w);
  ChargeDistribution twice = restrict_extend(once, w);
  CHECK(once.nuclei.size() == twice.nuclei.size());
  double err = 0.0;
  for (std::size_t i = 0; i < once.density.size(); ++i)
    err = std::max(err, std::abs(once.density[i] - twice.density[i]));
  CHECK(err <= 1e-12);
}

TEST_CASE("restrict_extend rejects empty or oversized windows") {
  EnsembleSpec spec = background_spec(2, 1.0);
  PeriodicSample s = sample_periodic(spec, 4, 0);
  ChargeDistribution m = realize_charges(s, make_grid(s, 32));
  Box empty;
  CHECK_THROWS_AS(restrict_extend(m, empty), InvalidInput);
  Box big = cube_at(Eigen::Vector3d(2.0, 2.0, 0.0), 9.0, 2);
  CHECK_THROWS_AS(restrict_extend(m, big), InvalidInput);
}

TEST_CASE("verify_assumptions: homogeneous density meets its own bound") {
  EnsembleSpec spec = background_spec(2, 0.7);
  PeriodicSample s = sample_periodic(spec, 4, 0);
  ChargeDistribution m = realize_charges(s, make_grid(s, 32));
  AssumptionReport rep = verify_assumptions(m, 0.25, 0.7);
  CHECK(rep.min_ball_average_r1 == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(rep.min_ball_average_r2 == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(rep.lower_bound_ok);
  CHECK(rep.separation_ok);  // fewer than two nuclei
}

TEST_CASE("verify_assumptions: close nuclei violate the separation rule") {
  EnsembleSpec spec = background_spec(2, 1.0);
  PeriodicSample s = sample_periodic(spec, 4, 0);
  ChargeDistribution m = realize_charges(s, make_grid(s, 32));
  const double rho = 0.25;
  m.nuclei.push_back({Eigen::Vector3d(1.0, 1.0, 0.0), 1.0});
  m.nuclei.push_back({Eigen::Vector3d(1.0 + 3.0 * rho, 1.0, 0.0), 1.0});
  AssumptionReport rep = verify_assumptions(m, rho, 1.0);
  CHECK_FALSE(rep.separation_ok);
  CHECK(rep.min_nucleus_separation == doctest::Approx(3.0 * rho));
}

TEST_CASE("verify_assumptions: Bernoulli lattice local mass stays bounded") {
  EnsembleSpec spec = two_species_spec(2);
  PeriodicSample s = sample_periodic(spec, 8, 31);
  ChargeDistribution m = realize_charges(s, make_grid(s, 64));
  AssumptionReport rep = verify_assumptions(m, spec.rho_sep, 0.1);

  // oracle: exhaustive scan over a lattice of centers of the unit-ball mass
  const double w = m.grid.quad_weight();
  double direct_max = 0.0;
  for (int cx = 0; cx < 16; ++cx) {
    for (int cy = 0; cy < 16; ++cy) {
      const Eigen::Vector3d c(cx * 0.5, cy * 0.5, 0.0);
      double acc = 0.0;
      for (std::size_t i = 0; i < m.density.size(); ++i)
        if (periodic_distance(m.grid.coord(i), c, m.grid) <= 1.0)
          acc += m.density[i] * w;
      direct_max = std::max(direct_max, acc);
    }
  }
  CHECK(rep.max_local_mass >= direct_max - 1e-9);
  // at most 5 sites of the unit square lattice fit in a unit ball, and the
  // max charge per site is 2
  CHECK(rep.max_local_mass <= 2.0 * 5.0 + 1e-6);
}

TEST_CASE("sample JSON record carries seed and occupancy") {
  EnsembleSpec spec = two_species_spec(1);
  PeriodicSample s = sample_periodic(spec, 4, 77);
  const std::string j = sample_to_json(s);
  CHECK(j.find("\"seed\":77") != std::string::npos);
  CHECK(j.find("\"L\":4") != std::string::npos);
}

#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "tfwlab/grid.hpp"
#include "tfwlab/rng.hpp"

using namespace tfw;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

GridSpec cubic_grid(int dim, int n, double side) {
  Eigen::Matrix3d cell = Eigen::Matrix3d::Identity();
  cell.topLeftCorner(dim, dim) *= side;
  return GridSpec(dim, n, cell);
}

ScalarField from_function(const GridSpec& g,
                          const std::function<double(const Eigen::Vector3d&)>& fn) {
  ScalarField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = fn(g.coord(i));
  return f;
}

// Smooth band-limited random field with zero mean.
ScalarField random_low_mode_field(const GridSpec& g, std::uint64_t seed) {
  Rng rng(seed);
  ScalarField f(g, 0.0);
  for (int mode = 0; mode < 5; ++mode) {
    Eigen::Vector3d freq = Eigen::Vector3d::Zero();
    for (int a = 0; a < g.dim; ++a)
      freq[a] = static_cast<double>(1 + rng.index(3));
    const double amp = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, kTwoPi);
    Eigen::Matrix3d inv = Eigen::Matrix3d::Identity();
    inv.topLeftCorner(g.dim, g.dim) =
        g.cell.topLeftCorner(g.dim, g.dim).inverse();
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Eigen::Vector3d frac = inv * g.coord(i);
      double arg = phase;
      for (int a = 0; a < g.dim; ++a) arg += kTwoPi * freq[a] * frac[a];
      f[i] += amp * std::sin(arg);
    }
  }
  const double mean = integrate(f) / g.volume();
  for (double& v : f.values) v -= mean;
  return f;
}

}  // namespace

TEST_CASE("integrate: constants, modes, and quadrature weight") {
  GridSpec g = cubic_grid(3, 16, 2.0);
  CHECK(integrate(ScalarField(g, 1.0)) == doctest::Approx(8.0).epsilon(1e-14));

  ScalarField mode = from_function(
      g, [&](const Eigen::Vector3d& x) { return std::sin(kTwoPi * x[0] / 2.0); });
  CHECK(std::abs(integrate(mode)) < 1e-12);
}

TEST_CASE("poisson solver: zero rhs gives zero field") {
  GridSpec g = cubic_grid(2, 16, 1.0);
  ScalarField rhs(g, 0.0);
  ScalarField phi = poisson_periodic(rhs);
  CHECK(linf_norm(phi) == 0.0);
}

TEST_CASE("poisson solver: single Fourier mode is solved exactly") {
  const double side = 3.0;
  for (int dim : {1, 2, 3}) {
    GridSpec g = cubic_grid(dim, 16, side);
    const double amp = 2.5;
    ScalarField rhs = from_function(g, [&](const Eigen::Vector3d& x) {
      return amp * std::sin(kTwoPi * x[0] / side);
    });
    ScalarField phi = poisson_periodic(rhs);
    const double factor = std::pow(side / kTwoPi, 2);
    double err = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const double expected =
          amp * factor * std::sin(kTwoPi * g.coord(i)[0] / side);
      err = std::max(err, std::abs(phi[i] - expected));
    }
    CHECK(err <= 1e-12 * amp);
  }
}

TEST_CASE("poisson solver: spectral laplacian inverts it to 1e-12") {
  GridSpec g = cubic_grid(3, 16, 2.0);
  ScalarField rhs = random_low_mode_field(g, 7);
  ScalarField phi = poisson_periodic(rhs);
  ScalarField back = laplacian(phi);
  double err = 0.0;
  for (std::size_t i = 0; i < back.size(); ++i)
    err = std::max(err, std::abs(-back[i] - rhs[i]));
  CHECK(err <= 1e-12 * linf_norm(rhs));
  CHECK(std::abs(integrate(phi)) < 1e-12);  // zero-mean gauge
}

TEST_CASE("poisson solver: independent finite-difference check at its own order") {
  // The FD laplacian of the spectral solution must reproduce the rhs with an
  // error that shrinks at second order under grid refinement.
  double errors[2];
  int idx = 0;
  for (int n : {24, 48}) {
    GridSpec g = cubic_grid(2, n, 2.0);
    ScalarField rhs = from_function(g, [&](const Eigen::Vector3d& x) {
      return std::sin(kTwoPi * x[0] / 2.0) * std::cos(2.0 * kTwoPi * x[1] / 2.0);
    });
    ScalarField phi = poisson_periodic(rhs);
    ScalarField lap_fd = testutil::fd_laplacian(phi);
    double err = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i)
      err = std::max(err, std::abs(-lap_fd[i] - rhs[i]));
    errors[idx++] = err;
  }
  const double order = std::log2(errors[0] / errors[1]);
  CHECK(order == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("poisson solver: non-neutral rhs is rejected with the mean") {
  GridSpec g = cubic_grid(2, 16, 1.0);
  ScalarField rhs(g, 0.5);
  CHECK_THROWS_AS(poisson_periodic(rhs), NonNeutralRhs);
  try {
    poisson_periodic(rhs);
  } catch (const NonNeutralRhs& e) {
    CHECK(e.mean == doctest::Approx(0.5));
  }
}

TEST_CASE("gradient: constants and analytic derivatives") {
  GridSpec g = cubic_grid(2, 32, 2.0);
  auto grads = gradient(ScalarField(g, 7.0));
  for (const auto& comp : grads) CHECK(linf_norm(comp) < 1e-12);

  const double side = 2.0;
  ScalarField f = from_function(g, [&](const Eigen::Vector3d& x) {
    return std::sin(kTwoPi * x[0] / side);
  });
  auto df = gradient(f);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double expected =
        (kTwoPi / side) * std::cos(kTwoPi * g.coord(i)[0] / side);
    err = std::max(err, std::abs(df[0][i] - expected));
  }
  CHECK(err <= 1e-12 * (kTwoPi / side));
  CHECK(linf_norm(df[1]) < 1e-12);
}

TEST_CASE("gradient: Parseval identity against quadrature") {
  GridSpec g = cubic_grid(3, 16, 2.0);
  ScalarField f = random_low_mode_field(g, 21);
  auto df = gradient(f);
  double quad = 0.0;
  for (int a = 0; a < 3; ++a) quad += inner(df[a], df[a]);
  const double spectral = dirichlet_energy(f);
  CHECK(quad == doctest::Approx(spectral).epsilon(1e-10));
}

TEST_CASE("non-cubic cell: gradient respects the metric of F") {
  Eigen::Matrix3d cell = Eigen::Matrix3d::Identity();
  cell(0, 0) = 2.0;
  cell(0, 1) = 0.5;  // sheared cell
  cell(1, 1) = 1.5;
  GridSpec g(2, 32, cell);
  // plane wave along the first reciprocal direction
  Eigen::Matrix2d inv = cell.topLeftCorner(2, 2).inverse();
  ScalarField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Eigen::Vector3d x = g.coord(i);
    const Eigen::Vector2d frac = inv * x.head(2);
    f[i] = std::sin(kTwoPi * frac[0]);
  }
  auto df = gradient(f);
  // analytic gradient: 2 pi cos(2 pi frac0) * row 0 of cell^{-T}
  const Eigen::Vector2d k = kTwoPi * inv.transpose().col(0);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Eigen::Vector2d frac = inv * g.coord(i).head(2);
    const double c = std::cos(kTwoPi * frac[0]);
    err = std::max(err, std::abs(df[0][i] - c * k[0]));
    err = std::max(err, std::abs(df[1][i] - c * k[1]));
  }
  CHECK(err < 1e-11);
}

TEST_CASE("operators commute with whole-step grid translations") {
  GridSpec g = cubic_grid(2, 16, 2.0);
  ScalarField f = random_low_mode_field(g, 3);
  const int shift = 5;
  ScalarField shifted(g);
  const int n = g.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      shifted[static_cast<std::size_t>(i) * n + j] =
          f[static_cast<std::size_t>((i + shift) % n) * n + j];
  ScalarField a = laplacian(shifted);
  ScalarField b = laplacian(f);
  double err = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      err = std::max(err, std::abs(a[static_cast<std::size_t>(i) * n + j] -
                                   b[static_cast<std::size_t>((i + shift) % n) * n + j]));
  CHECK(err <= 1e-12 * (linf_norm(b) + 1.0));
}

TEST_CASE("cutoff eta: paper values and continuity") {
  CutoffEta eta{0.2, {Eigen::Vector3d::Zero()}};
  CHECK(eta.radial(0.5 * eta.rho) == 0.0);
  CHECK(eta.radial(3.0 * eta.rho) == 1.0);
  // midpoint value exp(-log 2) = 1/2
  CHECK(eta.radial(1.5 * eta.rho) == doctest::Approx(0.5).epsilon(1e-14));

  // two-sided continuity at the seams
  for (double r0 : {eta.rho, 1.5 * eta.rho, 2.0 * eta.rho}) {
    const double eps = 1e-11;
    CHECK(std::abs(eta.radial(r0 + eps) - eta.radial(r0 - eps)) <= 1e-9);
  }
}

TEST_CASE("cutoff eta: |grad|^2 / eta stays bounded on a dense sample") {
  CutoffEta eta{0.3, {}};
  double bound = 0.0;
  const double h = 1e-5;
  for (double r = eta.rho + 1e-6; r < 2.5 * eta.rho; r += 1e-4) {
    const double e = eta.radial(r);
    if (e <= 0.0) continue;
    const double de = (eta.radial(r + h) - eta.radial(r - h)) / (2.0 * h);
    bound = std::max(bound, de * de / e);
  }
  CHECK(bound < 1e4);   // c_eta(rho) exists
  CHECK(bound > 0.0);
}

TEST_CASE("cutoff field: empty center list means eta == 1") {
  GridSpec g = cubic_grid(2, 16, 2.0);
  CutoffEta eta{0.2, {}};
  ScalarField field = cutoff_field(eta, g);
  CHECK(field_min(field) == 1.0);
}

TEST_CASE("shell profile: constants, indicators, synthetic decay") {
  GridSpec g = cubic_grid(3, 32, 8.0);
  const Eigen::Vector3d center(4.0, 4.0, 4.0);

  auto ones = shell_profile(ScalarField(g, 1.0), center, 1.0);
  for (const auto& s : ones)
    if (s.count > 0) CHECK(s.max_abs == 1.0);

  ScalarField ind = from_function(g, [&](const Eigen::Vector3d& x) {
    return periodic_distance(x, center, g) <= 1.0 ? 1.0 : 0.0;
  });
  auto shells = shell_profile(ind, center, 1.0);
  for (const auto& s : shells)
    if (s.radius > 1.5) CHECK(s.l2 == 0.0);
}

TEST_CASE("shell profile + decay oracle: known exponential rate") {
  GridSpec g = cubic_grid(3, 48, 12.0);
  const Eigen::Vector3d center(6.0, 6.0, 6.0);
  const double gamma = 0.7;
  ScalarField f = from_function(g, [&](const Eigen::Vector3d& x) {
    return std::exp(-gamma * periodic_distance(x, center, g));
  });
  auto shells = shell_profile(f, center, 0.5);
  // fit log max against the shell inner edge (where the max of a radially
  // decreasing field sits)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (const auto& s : shells) {
    const double r_lo = s.radius - 0.25;
    if (r_lo < 0.5 || s.radius > 5.0 || s.count == 0) continue;
    sx += r_lo;
    sy += std::log(s.max_abs);
    sxx += r_lo * r_lo;
    sxy += r_lo * std::log(s.max_abs);
    ++cnt;
  }
  const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-gamma).epsilon(0.02));
}

TEST_CASE("field binary round trip") {
  GridSpec g = cubic_grid(2, 16, 2.0);
  ScalarField f = random_low_mode_field(g, 11);
  const std::string path = "test_field_roundtrip.bin";
  write_field(f, path);
  ScalarField back = read_field(path);
  REQUIRE(back.grid.same_layout(f.grid));
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    err = std::max(err, std::abs(f[i] - back[i]));
  CHECK(err == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("trigonometric interpolation matches grid values and modes") {
  GridSpec g = cubic_grid(2, 16, 2.0);
  ScalarField f = random_low_mode_field(g, 5);
  // exact at grid points
  const std::size_t probe = 37;
  CHECK(interpolate(f, g.coord(probe)) ==
        doctest::Approx(f[probe]).epsilon(1e-12));
  // exact for a resolved mode at an off-grid point
  ScalarField mode = from_function(g, [&](const Eigen::Vector3d& x) {
    return std::cos(kTwoPi * x[1] / 2.0);
  });
  const Eigen::Vector3d x(0.137, 1.491, 0.0);
  CHECK(interpolate(mode, x) ==
        doctest::Approx(std::cos(kTwoPi * x[1] / 2.0)).epsilon(1e-12));
}

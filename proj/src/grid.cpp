#include "tfwlab/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

namespace tfw {

namespace {

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// FFTW workspace for one (dim, n) layout. Plans are created under a global
// lock; each instance is used by a single thread (see spectral_for).
class Spectral {
 public:
  Spectral(int dim, int n) : dim_(dim), n_(n) {
    nreal_ = 1;
    for (int a = 0; a < dim; ++a) nreal_ *= static_cast<std::size_t>(n);
    ncplx_ = (nreal_ / n) * (n / 2 + 1);
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * nreal_));
    cplx_ = static_cast<fftw_complex*>(
        fftw_malloc(sizeof(fftw_complex) * ncplx_));
    int dims[3] = {n, n, n};
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fwd_ = fftw_plan_dft_r2c(dim, dims, real_, cplx_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(dim, dims, cplx_, real_, FFTW_ESTIMATE);
  }

  ~Spectral() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(cplx_);
  }

  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  std::size_t nreal() const { return nreal_; }
  std::size_t ncplx() const { return ncplx_; }

  void forward(const std::vector<double>& in,
               std::vector<std::complex<double>>& out) {
    std::memcpy(real_, in.data(), sizeof(double) * nreal_);
    fftw_execute(fwd_);
    out.resize(ncplx_);
    std::memcpy(out.data(), cplx_, sizeof(fftw_complex) * ncplx_);
  }

  // Normalized inverse: forward followed by inverse is the identity.
  void inverse(const std::vector<std::complex<double>>& in,
               std::vector<double>& out) {
    std::memcpy(cplx_, in.data(), sizeof(fftw_complex) * ncplx_);
    fftw_execute(bwd_);
    out.resize(nreal_);
    const double scale = 1.0 / static_cast<double>(nreal_);
    for (std::size_t i = 0; i < nreal_; ++i) out[i] = real_[i] * scale;
  }

 private:
  int dim_, n_;
  std::size_t nreal_ = 0, ncplx_ = 0;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
};

Spectral& spectral_for(int dim, int n) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<Spectral>> cache;
  auto& slot = cache[{dim, n}];
  if (!slot) slot = std::make_unique<Spectral>(dim, n);
  return *slot;
}

// Walks the half-complex spectrum, handing the physical wavevector of every
// entry to `fn(flat_index, k, axis_freqs)`.
template <typename Fn>
void for_each_mode(const GridSpec& g, Fn&& fn) {
  const int d = g.dim;
  const int n = g.n;
  const int nlast = n / 2 + 1;
  Eigen::Matrix3d inv_t = Eigen::Matrix3d::Identity();
  inv_t.topLeftCorner(d, d) =
      g.cell.topLeftCorner(d, d).inverse().transpose();
  const double two_pi = 6.283185307179586476925286766559;

  int zi[3] = {0, 0, 0};
  const int n0 = (d >= 3) ? n : 1;
  const int n1 = (d >= 2) ? n : 1;
  std::size_t flat = 0;
  Eigen::Vector3d freq = Eigen::Vector3d::Zero();
  for (int a = 0; a < n0; ++a) {
    for (int b = 0; b < n1; ++b) {
      for (int c = 0; c < nlast; ++c, ++flat) {
        // slowest axes first, matching FFTW's row-major layout
        int idx = 0;
        if (d == 3) {
          zi[0] = a;
          zi[1] = b;
          zi[2] = c;
        } else if (d == 2) {
          zi[0] = b;
          zi[1] = c;
        } else {
          zi[0] = c;
        }
        freq.setZero();
        for (idx = 0; idx < d; ++idx) {
          int z = zi[idx];
          if (idx < d - 1 && z > n / 2) z -= n;  // signed frequency
          freq[idx] = static_cast<double>(z);
        }
        Eigen::Vector3d k = two_pi * (inv_t * freq);
        fn(flat, k, freq);
      }
    }
  }
}

bool axis_at_nyquist(const GridSpec& g, const Eigen::Vector3d& freq,
                     int axis) {
  return g.n % 2 == 0 && std::abs(freq[axis] - g.n / 2) < 0.5;
}

}  // namespace

GridSpec::GridSpec(int dim_, int n_, const Eigen::Matrix3d& cell_)
    : dim(dim_), n(n_), cell(cell_) {
  if (dim < 1 || dim > 3) throw InvalidInput("grid dimension must be 1, 2, or 3");
  if (n < 8) throw InvalidInput("grid needs at least 8 points per axis");
  if (std::abs(cell.topLeftCorner(dim, dim).determinant()) < 1e-14)
    throw InvalidInput("singular cell matrix");
}

std::size_t GridSpec::size() const {
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

double GridSpec::volume() const {
  return std::abs(cell.topLeftCorner(dim, dim).determinant());
}

double GridSpec::max_spacing() const {
  double h = 0.0;
  for (int a = 0; a < dim; ++a) h = std::max(h, spacing(a));
  return h;
}

Eigen::Vector3d GridSpec::coord(std::size_t flat) const {
  Eigen::Vector3d frac = Eigen::Vector3d::Zero();
  for (int a = dim - 1; a >= 0; --a) {
    frac[a] = static_cast<double>(flat % n) / n;
    flat /= n;
  }
  return cell * frac;
}

bool GridSpec::same_layout(const GridSpec& other) const {
  return dim == other.dim && n == other.n &&
         (cell - other.cell).norm() <= 1e-12 * (cell.norm() + 1.0);
}

double periodic_distance(const Eigen::Vector3d& x, const Eigen::Vector3d& y,
                         const GridSpec& grid) {
  Eigen::Vector3d diff = x - y;
  // Fast path for diagonal cells; generic 3^d image search otherwise.
  bool diagonal = true;
  for (int a = 0; a < grid.dim && diagonal; ++a)
    for (int b = 0; b < grid.dim; ++b)
      if (a != b && std::abs(grid.cell(a, b)) > 1e-14) diagonal = false;
  if (diagonal) {
    double s = 0.0;
    for (int a = 0; a < grid.dim; ++a) {
      const double len = grid.cell(a, a);
      double r = std::remainder(diff[a], len);
      s += r * r;
    }
    return std::sqrt(s);
  }
  double best = diff.norm();
  int lim[3] = {grid.dim >= 1 ? 1 : 0, grid.dim >= 2 ? 1 : 0,
                grid.dim >= 3 ? 1 : 0};
  for (int s0 = -lim[0]; s0 <= lim[0]; ++s0)
    for (int s1 = -lim[1]; s1 <= lim[1]; ++s1)
      for (int s2 = -lim[2]; s2 <= lim[2]; ++s2) {
        Eigen::Vector3d shift =
            grid.cell * Eigen::Vector3d(s0, s1, s2);
        best = std::min(best, (diff + shift).norm());
      }
  return best;
}

double integrate(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.quad_weight();
}

double inner(const ScalarField& f, const ScalarField& g) {
  if (!f.grid.same_layout(g.grid)) throw InvalidInput("grid mismatch in inner");
  double s = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) s += f.values[i] * g.values[i];
  return s * f.grid.quad_weight();
}

double l2_norm(const ScalarField& f) { return std::sqrt(inner(f, f)); }

double linf_norm(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s = std::max(s, std::abs(v));
  return s;
}

double field_min(const ScalarField& f) {
  double s = f.values.empty() ? 0.0 : f.values.front();
  for (double v : f.values) s = std::min(s, v);
  return s;
}

double field_max(const ScalarField& f) {
  double s = f.values.empty() ? 0.0 : f.values.front();
  for (double v : f.values) s = std::max(s, v);
  return s;
}

void check_finite(const ScalarField& f, const std::string& label) {
  for (double v : f.values)
    if (!std::isfinite(v)) throw InvalidInput("non-finite value in " + label);
}

ScalarField poisson_periodic_projected(const ScalarField& rhs) {
  auto& sp = spectral_for(rhs.grid.dim, rhs.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(rhs.values, hat);
  for_each_mode(rhs.grid, [&](std::size_t i, const Eigen::Vector3d& k,
                              const Eigen::Vector3d&) {
    const double k2 = k.squaredNorm();
    hat[i] = (k2 > 0.0) ? hat[i] / k2 : 0.0;
  });
  ScalarField phi(rhs.grid);
  sp.inverse(hat, phi.values);
  return phi;
}

ScalarField poisson_periodic(const ScalarField& rhs) {
  const double amp = linf_norm(rhs);
  const double mean = integrate(rhs) / rhs.grid.volume();
  if (std::abs(mean) > 1e-8 * amp)
    throw NonNeutralRhs(mean, "poisson_periodic: rhs has mean " +
                                  std::to_string(mean) +
                                  ", exceeds neutrality tolerance");
  return poisson_periodic_projected(rhs);
}

std::vector<ScalarField> gradient(const ScalarField& f) {
  auto& sp = spectral_for(f.grid.dim, f.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(f.values, hat);
  std::vector<ScalarField> out;
  std::vector<std::complex<double>> comp(hat.size());
  for (int axis = 0; axis < f.grid.dim; ++axis) {
    for_each_mode(f.grid, [&](std::size_t i, const Eigen::Vector3d& k,
                              const Eigen::Vector3d& freq) {
      if (axis_at_nyquist(f.grid, freq, axis)) {
        comp[i] = 0.0;  // odd operator: drop the unpaired Nyquist mode
      } else {
        comp[i] = std::complex<double>(0.0, k[axis]) * hat[i];
      }
    });
    ScalarField g(f.grid);
    sp.inverse(comp, g.values);
    out.push_back(std::move(g));
  }
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  auto& sp = spectral_for(f.grid.dim, f.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(f.values, hat);
  for_each_mode(f.grid, [&](std::size_t i, const Eigen::Vector3d& k,
                            const Eigen::Vector3d&) {
    hat[i] *= -k.squaredNorm();
  });
  ScalarField out(f.grid);
  sp.inverse(hat, out.values);
  return out;
}

ScalarField variational_laplacian(const ScalarField& f) {
  auto& sp = spectral_for(f.grid.dim, f.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(f.values, hat);
  for_each_mode(f.grid, [&](std::size_t i, const Eigen::Vector3d& k,
                            const Eigen::Vector3d& freq) {
    double k2 = 0.0;
    for (int a = 0; a < f.grid.dim; ++a)
      if (!axis_at_nyquist(f.grid, freq, a)) k2 += k[a] * k[a];
    hat[i] *= -k2;
  });
  ScalarField out(f.grid);
  sp.inverse(hat, out.values);
  return out;
}

ScalarField second_derivative(const ScalarField& f, int i, int j) {
  if (i < 0 || j < 0 || i >= f.grid.dim || j >= f.grid.dim)
    throw InvalidInput("second_derivative: axis out of range");
  auto& sp = spectral_for(f.grid.dim, f.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(f.values, hat);
  for_each_mode(f.grid, [&](std::size_t m, const Eigen::Vector3d& k,
                            const Eigen::Vector3d& freq) {
    if (i != j && (axis_at_nyquist(f.grid, freq, i) ||
                   axis_at_nyquist(f.grid, freq, j))) {
      hat[m] = 0.0;
    } else {
      hat[m] *= -k[i] * k[j];
    }
  });
  ScalarField out(f.grid);
  sp.inverse(hat, out.values);
  return out;
}

double dirichlet_energy(const ScalarField& f) {
  auto& sp = spectral_for(f.grid.dim, f.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(f.values, hat);
  // Discrete Parseval over the half spectrum; last-axis interior modes twice.
  // Nyquist components are masked per axis to match gradient().
  const int n = f.grid.n;
  double sum = 0.0;
  for_each_mode(f.grid, [&](std::size_t i, const Eigen::Vector3d& k,
                            const Eigen::Vector3d& freq) {
    const double last = freq[f.grid.dim - 1];
    const bool doubled = last > 0.0 && !(n % 2 == 0 && last == n / 2);
    double k2 = 0.0;
    for (int a = 0; a < f.grid.dim; ++a)
      if (!axis_at_nyquist(f.grid, freq, a)) k2 += k[a] * k[a];
    sum += (doubled ? 2.0 : 1.0) * k2 * std::norm(hat[i]);
  });
  const double npts = static_cast<double>(f.grid.size());
  return sum / (npts * npts) * f.grid.volume();
}

ScalarField apply_inverse_quadratic_symbol(const ScalarField& f, double a,
                                           double b, double c) {
  auto& sp = spectral_for(f.grid.dim, f.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(f.values, hat);
  for_each_mode(f.grid, [&](std::size_t i, const Eigen::Vector3d& k,
                            const Eigen::Vector3d&) {
    const double k2 = k.squaredNorm();
    hat[i] /= (k2 > 0.0) ? (a * k2 + b + c / k2) : b;
  });
  ScalarField out(f.grid);
  sp.inverse(hat, out.values);
  return out;
}

double interpolate(const ScalarField& f, const Eigen::Vector3d& x) {
  auto& sp = spectral_for(f.grid.dim, f.grid.n);
  std::vector<std::complex<double>> hat;
  sp.forward(f.values, hat);
  const int d = f.grid.dim;
  Eigen::Vector3d frac =
      Eigen::Vector3d::Zero();
  frac.head(d) = f.grid.cell.topLeftCorner(d, d).inverse() * x.head(d);
  const double two_pi = 6.283185307179586476925286766559;
  const int n = f.grid.n;
  double acc = 0.0;
  for_each_mode(f.grid, [&](std::size_t i, const Eigen::Vector3d&,
                            const Eigen::Vector3d& freq) {
    double phase = 0.0;
    for (int a = 0; a < d; ++a) phase += freq[a] * frac[a];
    const double last = freq[d - 1];
    const bool doubled = last > 0.0 && !(n % 2 == 0 && last == n / 2);
    const std::complex<double> e(std::cos(two_pi * phase),
                                 std::sin(two_pi * phase));
    acc += (doubled ? 2.0 : 1.0) * (hat[i] * e).real();
  });
  return acc / static_cast<double>(f.grid.size());
}

double CutoffEta::radial(double r) const {
  // exp(-rho log2 / (2(r - rho))) written as 2^(-rho / (2(r - rho))), which
  // is exact at the midpoint value 1/2 whenever the exponent evaluates to 1
  if (r <= rho) return 0.0;
  if (r <= 1.5 * rho) return std::exp2(-0.5 * rho / (r - rho));
  if (r < 2.0 * rho) {
    const double rr = 3.0 * rho - r;  // lands in (rho, 1.5 rho)
    return 1.0 - std::exp2(-0.5 * rho / (rr - rho));
  }
  return 1.0;
}

double CutoffEta::operator()(const Eigen::Vector3d& x,
                             const GridSpec& grid) const {
  if (centers.empty() || rho <= 0.0) return 1.0;
  double r = std::numeric_limits<double>::infinity();
  for (const auto& c : centers) r = std::min(r, periodic_distance(x, c, grid));
  return radial(r);
}

ScalarField cutoff_field(const CutoffEta& eta, const GridSpec& grid) {
  ScalarField out(grid, 1.0);
  if (eta.centers.empty() || eta.rho <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = eta(grid.coord(i), grid);
  return out;
}

std::vector<ShellStat> shell_profile(const ScalarField& f,
                                     const Eigen::Vector3d& center,
                                     double width) {
  if (width < f.grid.max_spacing())
    throw InvalidInput("shell width below grid spacing");
  std::vector<ShellStat> shells;
  const double w = f.grid.quad_weight();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = periodic_distance(f.grid.coord(i), center, f.grid);
    const auto bin = static_cast<std::size_t>(r / width);
    if (shells.size() <= bin) shells.resize(bin + 1);
    auto& s = shells[bin];
    s.l2 += f[i] * f[i] * w;
    s.max_abs = std::max(s.max_abs, std::abs(f[i]));
    s.measure += w;
    s.count += 1;
  }
  for (std::size_t b = 0; b < shells.size(); ++b) {
    shells[b].radius = (static_cast<double>(b) + 0.5) * width;
    shells[b].l2 = std::sqrt(shells[b].l2);
  }
  return shells;
}

void write_field(const ScalarField& f, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw TfwError("cannot open " + path + " for writing");
  const char magic[4] = {'T', 'F', 'W', 'F'};
  std::uint32_t version = 1;
  std::uint32_t dim = static_cast<std::uint32_t>(f.grid.dim);
  std::uint32_t n = static_cast<std::uint32_t>(f.grid.n);
  std::fwrite(magic, 1, 4, fp);
  std::fwrite(&version, sizeof version, 1, fp);
  std::fwrite(&dim, sizeof dim, 1, fp);
  std::fwrite(&n, sizeof n, 1, fp);
  double cell[9];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cell[3 * r + c] = f.grid.cell(r, c);
  std::fwrite(cell, sizeof(double), 9, fp);
  std::fwrite(f.values.data(), sizeof(double), f.values.size(), fp);
  std::fclose(fp);
}

ScalarField read_field(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw TfwError("cannot open " + path);
  char magic[4];
  std::uint32_t version = 0, dim = 0, n = 0;
  double cell[9];
  bool ok = std::fread(magic, 1, 4, fp) == 4 &&
            std::memcmp(magic, "TFWF", 4) == 0 &&
            std::fread(&version, sizeof version, 1, fp) == 1 &&
            std::fread(&dim, sizeof dim, 1, fp) == 1 &&
            std::fread(&n, sizeof n, 1, fp) == 1 &&
            std::fread(cell, sizeof(double), 9, fp) == 9;
  if (!ok) {
    std::fclose(fp);
    throw TfwError("bad field header in " + path);
  }
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = cell[3 * r + c];
  ScalarField f(GridSpec(static_cast<int>(dim), static_cast<int>(n), m));
  ok = std::fread(f.values.data(), sizeof(double), f.values.size(), fp) ==
       f.values.size();
  std::fclose(fp);
  if (!ok) throw TfwError("truncated field data in " + path);
  return f;
}

}  // namespace tfw

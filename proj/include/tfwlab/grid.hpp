#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfw {

struct TfwError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : TfwError {
  using TfwError::TfwError;
};

// Uniform periodic grid with n points per axis on the cell spanned by the
// columns of `cell` (only the top-left dim x dim block is meaningful).
// Point (i0,..,i_{dim-1}) sits at cell * (i0/n, .., i_{dim-1}/n); storage is
// row-major with axis 0 slowest.
struct GridSpec {
  int dim = 3;
  int n = 0;
  Eigen::Matrix3d cell = Eigen::Matrix3d::Identity();

  GridSpec() = default;
  GridSpec(int dim_, int n_, const Eigen::Matrix3d& cell_);

  std::size_t size() const;
  double volume() const;
  double quad_weight() const { return volume() / static_cast<double>(size()); }
  double spacing(int axis) const { return cell.col(axis).norm() / n; }
  double max_spacing() const;
  Eigen::Vector3d coord(std::size_t flat) const;
  bool same_layout(const GridSpec& other) const;
};

struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
};

// Minimum-image distance on the torus defined by `cell`.
double periodic_distance(const Eigen::Vector3d& x, const Eigen::Vector3d& y,
                         const GridSpec& grid);

// ---- quadrature -----------------------------------------------------------

double integrate(const ScalarField& f);
double inner(const ScalarField& f, const ScalarField& g);
double l2_norm(const ScalarField& f);
double linf_norm(const ScalarField& f);
double field_min(const ScalarField& f);
double field_max(const ScalarField& f);
void check_finite(const ScalarField& f, const std::string& label);

// ---- spectral operators ---------------------------------------------------

struct NonNeutralRhs : TfwError {
  double mean;
  explicit NonNeutralRhs(double mean_, const std::string& what)
      : TfwError(what), mean(mean_) {}
};

// Unique zero-mean solution of -lap(phi) = rhs. Requires
// |mean(rhs)| <= 1e-8 * linf(rhs).
ScalarField poisson_periodic(const ScalarField& rhs);

// Same solve with the k = 0 mode projected out unconditionally (the gauge
// used inside the solver, where neutrality holds only up to roundoff).
ScalarField poisson_periodic_projected(const ScalarField& rhs);

std::vector<ScalarField> gradient(const ScalarField& f);
ScalarField laplacian(const ScalarField& f);
// Second derivative d^2 f / dx_i dx_j.
ScalarField second_derivative(const ScalarField& f, int i, int j);

// Divergence of the spectral gradient: the Laplacian whose quadratic form is
// exactly dirichlet_energy (unpaired Nyquist modes masked per axis, like
// gradient). Coincides with laplacian() on resolved fields.
ScalarField variational_laplacian(const ScalarField& f);

// integral |grad f|^2 without materializing the gradient fields.
double dirichlet_energy(const ScalarField& f);

// Applies the inverse of the Fourier symbol a k^2 + b + c / k^2; the k = 0
// entry is divided by b alone. Helmholtz-type smoothing for solvers.
ScalarField apply_inverse_quadratic_symbol(const ScalarField& f, double a,
                                           double b, double c);

// Spectrally accurate point evaluation (trigonometric interpolation).
double interpolate(const ScalarField& f, const Eigen::Vector3d& x);

// ---- cutoff ---------------------------------------------------------------

// Radial cutoff vanishing within rho of every center and equal to one beyond
// 2*rho: 0 on [0,rho], exp(-rho log2 / (2(r-rho))) on (rho, 1.5 rho],
// 1 - profile(3 rho - r) on (1.5 rho, 2 rho), 1 on [2 rho, inf).
struct CutoffEta {
  double rho = 0.0;
  std::vector<Eigen::Vector3d> centers;

  double radial(double r) const;
  double operator()(const Eigen::Vector3d& x, const GridSpec& grid) const;
};

ScalarField cutoff_field(const CutoffEta& eta, const GridSpec& grid);

// ---- radial shells --------------------------------------------------------

struct ShellStat {
  double radius = 0.0;    // bin midpoint
  double l2 = 0.0;        // quadrature-weighted L2 norm over the shell
  double max_abs = 0.0;
  double measure = 0.0;   // quadrature measure of the shell
  std::size_t count = 0;  // grid points in the shell
};

struct TooFewShells : TfwError {
  using TfwError::TfwError;
};

// Periodic-distance annuli of the given width around `center`.
std::vector<ShellStat> shell_profile(const ScalarField& f,
                                     const Eigen::Vector3d& center,
                                     double width);

// ---- flat binary export ---------------------------------------------------

void write_field(const ScalarField& f, const std::string& path);
ScalarField read_field(const std::string& path);

}  // namespace tfw

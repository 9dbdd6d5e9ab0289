#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tfwlab/experiment.hpp"

namespace py = pybind11;
using namespace tfw;

namespace {

py::array_t<double> field_to_array(const ScalarField& f) {
  std::vector<py::ssize_t> shape(f.grid.dim, f.grid.n);
  py::array_t<double> out(shape);
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

ScalarField array_to_field(const GridSpec& grid, py::array_t<double> arr) {
  auto buf = arr.request();
  if (static_cast<std::size_t>(buf.size) != grid.size())
    throw InvalidInput("array size does not match the grid");
  ScalarField f(grid);
  auto flat = arr.reshape({static_cast<py::ssize_t>(grid.size())});
  auto view = flat.unchecked<double, 1>();
  for (py::ssize_t i = 0; i < view.shape(0); ++i)
    f[static_cast<std::size_t>(i)] = view(i);
  return f;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "periodic TFW solver, random-lattice ensembles, and "
            "selection-based variance reduction";

  py::register_exception<TfwError>(m, "TfwError");

  // ---- grids and fields ----
  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init<int, int, const Eigen::Matrix3d&>(), py::arg("dim"),
           py::arg("n"), py::arg("cell"))
      .def_readonly("dim", &GridSpec::dim)
      .def_readonly("n", &GridSpec::n)
      .def_readonly("cell", &GridSpec::cell)
      .def("volume", &GridSpec::volume)
      .def("size", &GridSpec::size);

  py::class_<ScalarField>(m, "ScalarField")
      .def(py::init([](const GridSpec& g, double fill) {
             return ScalarField(g, fill);
           }),
           py::arg("grid"), py::arg("fill") = 0.0)
      .def_readonly("grid", &ScalarField::grid)
      .def("to_numpy", &field_to_array)
      .def_static("from_numpy", &array_to_field, py::arg("grid"),
                  py::arg("array"));

  m.def("integrate", &integrate);
  m.def("poisson_periodic", &poisson_periodic);
  m.def("gradient", &gradient);
  m.def("laplacian", &laplacian);
  m.def("dirichlet_energy", &dirichlet_energy);

  py::class_<CutoffEta>(m, "CutoffEta")
      .def(py::init([](double rho, std::vector<Eigen::Vector3d> centers) {
             return CutoffEta{rho, std::move(centers)};
           }),
           py::arg("rho"), py::arg("centers"))
      .def("radial", &CutoffEta::radial);

  // ---- ensembles ----
  py::class_<BravaisLattice>(m, "BravaisLattice")
      .def(py::init([](int dim, const Eigen::Matrix3d& F) {
             BravaisLattice l;
             l.dim = dim;
             l.F = F;
             l.validate();
             return l;
           }),
           py::arg("dim") = 3,
           py::arg("F") = Eigen::Matrix3d(Eigen::Matrix3d::Identity()))
      .def_readonly("dim", &BravaisLattice::dim)
      .def_readonly("F", &BravaisLattice::F);

  py::class_<EnsembleSpec>(m, "EnsembleSpec")
      .def(py::init([](int dim, std::vector<std::pair<double, double>> species,
                       double sigma, double rho_sep, double background,
                       const Eigen::Matrix3d& F) {
             EnsembleSpec spec;
             spec.lattice.dim = dim;
             spec.lattice.F = F;
             for (auto [charge, prob] : species)
               spec.species.entries.push_back({charge, prob});
             spec.sigma = sigma;
             spec.rho_sep = rho_sep;
             spec.background = background;
             spec.validate();
             return spec;
           }),
           py::arg("dim") = 3,
           py::arg("species") = std::vector<std::pair<double, double>>{},
           py::arg("sigma") = 0.25, py::arg("rho_sep") = 0.25,
           py::arg("background") = 0.0,
           py::arg("F") = Eigen::Matrix3d(Eigen::Matrix3d::Identity()))
      .def_readonly("sigma", &EnsembleSpec::sigma)
      .def_readonly("background", &EnsembleSpec::background);

  py::class_<PeriodicSample>(m, "PeriodicSample")
      .def_readonly("L", &PeriodicSample::L)
      .def_readonly("seed", &PeriodicSample::seed)
      .def_readonly("occupancy", &PeriodicSample::occupancy)
      .def("to_json", &sample_to_json);

  m.def("sample_periodic", &sample_periodic, py::arg("spec"), py::arg("L"),
        py::arg("seed"));
  m.def("sample_from_occupancy", &sample_from_occupancy, py::arg("spec"),
        py::arg("L"), py::arg("occupancy"));
  m.def("make_grid", &make_grid, py::arg("sample"), py::arg("n"));

  py::class_<ChargeDistribution>(m, "ChargeDistribution")
      .def_readonly("grid", &ChargeDistribution::grid)
      .def_readonly("density", &ChargeDistribution::density)
      .def_readonly("background", &ChargeDistribution::background)
      .def_readonly("sigma", &ChargeDistribution::sigma)
      .def("total_mass", &ChargeDistribution::total_mass);

  m.def("realize_charges", &realize_charges, py::arg("sample"),
        py::arg("grid"));

  py::class_<Box>(m, "Box")
      .def(py::init([](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
             return Box{lo, hi};
           }),
           py::arg("lo"), py::arg("hi"));
  m.def("restrict_extend", &restrict_extend, py::arg("m"), py::arg("window"));

  // ---- solver ----
  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("tol", &SolverConfig::tol)
      .def_readwrite("max_iter", &SolverConfig::max_iter)
      .def_readwrite("keep_log", &SolverConfig::keep_log);

  py::class_<TFWSolution>(m, "TFWSolution")
      .def_readonly("u", &TFWSolution::u)
      .def_readonly("phi", &TFWSolution::phi)
      .def_readonly("theta", &TFWSolution::theta)
      .def_readonly("energy", &TFWSolution::energy)
      .def_readonly("residual", &TFWSolution::residual)
      .def_readonly("iterations", &TFWSolution::iterations)
      .def_readonly("converged", &TFWSolution::converged);

  m.def("solve_tfw", &solve_tfw, py::arg("m"),
        py::arg("config") = SolverConfig{});
  m.def("homogeneous_reference", &homogeneous_reference, py::arg("grid"),
        py::arg("c0"));
  m.def("energy_gradient", &energy_gradient, py::arg("u"), py::arg("m"));
  m.def("tfw_energy_value", &tfw_energy_value, py::arg("u"), py::arg("m"));

  // ---- energy ----
  py::enum_<NucleusMode>(m, "NucleusMode")
      .value("smeared", NucleusMode::smeared)
      .value("point", NucleusMode::point);

  py::class_<EnergyBreakdown>(m, "EnergyBreakdown")
      .def_readonly("kinetic", &EnergyBreakdown::kinetic)
      .def_readonly("tf", &EnergyBreakdown::tf)
      .def_readonly("coulomb_cont", &EnergyBreakdown::coulomb_cont)
      .def_readonly("coulomb_point", &EnergyBreakdown::coulomb_point)
      .def_readonly("total", &EnergyBreakdown::total)
      .def_readonly("per_volume", &EnergyBreakdown::per_volume);

  m.def("energy_rve", &energy_rve, py::arg("solution"), py::arg("m"),
        py::arg("mode") = NucleusMode::smeared,
        py::arg("residual_cap") = 1e-6);
  m.def("windowed_energy", &windowed_energy, py::arg("solution"), py::arg("m"),
        py::arg("window"), py::arg("mode") = NucleusMode::smeared);
  m.def("gaussian_self_potential", &gaussian_self_potential, py::arg("sigma"));

  // ---- statistics ----
  py::class_<Descriptor>(m, "Descriptor")
      .def_static("species", &Descriptor::species_of, py::arg("a"))
      .def_static("pair", &Descriptor::pair_of, py::arg("a"), py::arg("b"))
      .def("tag", &Descriptor::tag);

  m.def("species_density", &species_density, py::arg("sample"), py::arg("a"));
  m.def("nn_contact_density", &nn_contact_density, py::arg("sample"),
        py::arg("a"), py::arg("b"));
  m.def("motif_density", &motif_density, py::arg("sample"), py::arg("pattern"));
  m.def("eval_stats", &eval_stats, py::arg("sample"), py::arg("descriptors"));
  m.def("expected_stats", &expected_stats, py::arg("spec"),
        py::arg("descriptors"));

  py::class_<CorrelationReport>(m, "CorrelationReport")
      .def_readonly("mean_energy", &CorrelationReport::mean_energy)
      .def_readonly("var_energy", &CorrelationReport::var_energy)
      .def_readonly("explained_fraction",
                    &CorrelationReport::explained_fraction)
      .def_readonly("condition_number", &CorrelationReport::condition_number)
      .def_readonly("r_var", &CorrelationReport::r_var)
      .def_readonly("samples", &CorrelationReport::samples);

  m.def("correlation_report", &correlation_report, py::arg("energies"),
        py::arg("stats"), py::arg("L"), py::arg("dim"));

  // ---- selection Monte Carlo ----
  py::enum_<CriterionMode>(m, "CriterionMode")
      .value("raw", CriterionMode::raw)
      .value("standardized", CriterionMode::standardized);

  py::class_<ExperimentSetup>(m, "ExperimentSetup")
      .def(py::init([](const EnsembleSpec& spec, int L, int grid_n,
                       const SolverConfig& solver, NucleusMode mode) {
             return ExperimentSetup{spec, L, grid_n, solver, mode};
           }),
           py::arg("spec"), py::arg("L"), py::arg("grid_n"),
           py::arg("solver") = SolverConfig{},
           py::arg("mode") = NucleusMode::smeared);

  py::class_<SelectionConfig>(m, "SelectionConfig")
      .def(py::init<>())
      .def_readwrite("delta", &SelectionConfig::delta)
      .def_readwrite("descriptors", &SelectionConfig::descriptors)
      .def_readwrite("mode", &SelectionConfig::mode)
      .def_readwrite("plain_budget", &SelectionConfig::plain_budget)
      .def_readwrite("selected_budget", &SelectionConfig::selected_budget)
      .def_readwrite("pilot_count", &SelectionConfig::pilot_count)
      .def_readwrite("L_list", &SelectionConfig::L_list)
      .def_readwrite("seed", &SelectionConfig::seed)
      .def_readwrite("candidate_cap", &SelectionConfig::candidate_cap);

  py::class_<StatLaw>(m, "StatLaw")
      .def_readonly("mean", &StatLaw::mean)
      .def_readonly("sd", &StatLaw::sd);

  m.def("stat_law", &stat_law, py::arg("spec"), py::arg("L"),
        py::arg("descriptors"), py::arg("mode"), py::arg("pilot_count"),
        py::arg("seed"));
  m.def("selection_accepts", &selection_accepts, py::arg("stats"),
        py::arg("law"), py::arg("delta"), py::arg("mode"), py::arg("L"),
        py::arg("dim"));

  py::class_<SampleRecord>(m, "SampleRecord")
      .def_readonly("index", &SampleRecord::index)
      .def_readonly("energy", &SampleRecord::energy)
      .def_readonly("stats", &SampleRecord::stats)
      .def_readonly("iterations", &SampleRecord::iterations)
      .def_readonly("converged", &SampleRecord::converged)
      .def_readonly("accepted", &SampleRecord::accepted);

  py::class_<RunStream>(m, "RunStream")
      .def_readonly("records", &RunStream::records)
      .def_readonly("candidates", &RunStream::candidates)
      .def_readonly("solves", &RunStream::solves)
      .def("energies", &RunStream::energies);

  m.def("run_plain", &run_plain, py::arg("setup"), py::arg("descriptors"),
        py::arg("budget"), py::arg("seed"));
  m.def("run_selected", &run_selected, py::arg("setup"), py::arg("config"),
        py::arg("law"), py::arg("seed"));

  py::class_<RateStudy>(m, "RateStudy")
      .def_readonly("candidates", &RateStudy::candidates)
      .def_readonly("accepted", &RateStudy::accepted)
      .def_readonly("rate", &RateStudy::rate);

  m.def("selection_rate_study", &selection_rate_study, py::arg("spec"),
        py::arg("L"), py::arg("config"), py::arg("law"), py::arg("candidates"),
        py::arg("seed"));

  py::class_<CltFit>(m, "CltFit")
      .def_readonly("slope", &CltFit::slope)
      .def_readonly("slope_se", &CltFit::slope_se)
      .def_readonly("variances", &CltFit::variances);

  m.def("clt_scaling_study", &clt_scaling_study, py::arg("spec"),
        py::arg("points_per_unit"), py::arg("solver"), py::arg("mode"),
        py::arg("L_list"), py::arg("budget"), py::arg("seed"));
  m.def("multilevel_remainder_diag", &multilevel_remainder_diag,
        py::arg("sample"), py::arg("grid_n"), py::arg("solver"),
        py::arg("widths"), py::arg("mode") = NucleusMode::smeared);

  // ---- locality ----
  py::class_<SiteEdit>(m, "SiteEdit")
      .def(py::init([](const Eigen::Vector3i& site, int new_species) {
             return SiteEdit{site, new_species};
           }),
           py::arg("site"), py::arg("new_species"));

  py::class_<PerturbationSpec>(m, "PerturbationSpec")
      .def(py::init([](const PeriodicSample& base,
                       std::vector<SiteEdit> site_edits) {
             PerturbationSpec p;
             p.base = base;
             p.site_edits = std::move(site_edits);
             return p;
           }),
           py::arg("base"), py::arg("site_edits"));

  py::class_<PerturbationResult>(m, "PerturbationResult")
      .def_readonly("w", &PerturbationResult::w)
      .def_readonly("psi", &PerturbationResult::psi)
      .def_readonly("center", &PerturbationResult::center);

  m.def("perturb_and_solve", &perturb_and_solve, py::arg("pspec"),
        py::arg("grid_n"), py::arg("config"));

  py::class_<ShellStat>(m, "ShellStat")
      .def_readonly("radius", &ShellStat::radius)
      .def_readonly("l2", &ShellStat::l2)
      .def_readonly("max_abs", &ShellStat::max_abs)
      .def_readonly("count", &ShellStat::count);

  m.def("shell_profile", &shell_profile, py::arg("field"), py::arg("center"),
        py::arg("width"));

  py::class_<DecayFit>(m, "DecayFit")
      .def_readonly("gamma", &DecayFit::gamma)
      .def_readonly("r_squared", &DecayFit::r_squared)
      .def_readonly("points_used", &DecayFit::points_used)
      .def_readonly("no_decay", &DecayFit::no_decay);

  m.def("decay_fit_shells", &decay_fit_shells, py::arg("shells"),
        py::arg("floor"), py::arg("max_radius"));
}

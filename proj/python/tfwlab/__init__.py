"""Periodic Thomas-Fermi-von Weizsacker laboratory for random lattices.

The heavy lifting lives in the compiled extension ``tfwlab._core``; this
package re-exports its public surface.
"""

from tfwlab._core import (  # noqa: F401
    Box,
    BravaisLattice,
    ChargeDistribution,
    CltFit,
    CorrelationReport,
    CriterionMode,
    CutoffEta,
    DecayFit,
    Descriptor,
    EnergyBreakdown,
    EnsembleSpec,
    ExperimentSetup,
    GridSpec,
    NucleusMode,
    PeriodicSample,
    PerturbationResult,
    PerturbationSpec,
    RateStudy,
    RunStream,
    SampleRecord,
    ScalarField,
    SelectionConfig,
    ShellStat,
    SiteEdit,
    SolverConfig,
    StatLaw,
    TFWSolution,
    TfwError,
    clt_scaling_study,
    correlation_report,
    decay_fit_shells,
    dirichlet_energy,
    energy_gradient,
    energy_rve,
    eval_stats,
    expected_stats,
    gaussian_self_potential,
    gradient,
    homogeneous_reference,
    integrate,
    laplacian,
    make_grid,
    motif_density,
    multilevel_remainder_diag,
    nn_contact_density,
    perturb_and_solve,
    poisson_periodic,
    realize_charges,
    restrict_extend,
    run_plain,
    run_selected,
    sample_from_occupancy,
    sample_periodic,
    selection_accepts,
    selection_rate_study,
    shell_profile,
    solve_tfw,
    species_density,
    stat_law,
    tfw_energy_value,
    windowed_energy,
)

__version__ = "0.1.0"

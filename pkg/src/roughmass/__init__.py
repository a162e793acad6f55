"""Desk-scale numerics for the mass of low-regularity asymptotically
flat metrics: smoothing, conformal curvature correction, ADM mass
quadrature, and every explicit inequality of the construction."""

from .adm import MassReport, adm_mass, mass_at_radius, mass_shift_check
from .bounds import (
    BoundsReport,
    elliptic_bounds_rhs,
    estimate_sobolev_constant,
    evaluate_bounds,
    mass_lower_bound,
    moser_bounds,
    moser_breakdown,
    smallness_alpha,
    sobolev_constant,
)
from .conformal import (
    StructuralConstants,
    conformal_rescale,
    conformal_scalar,
    structural_constants,
)
from .elliptic import (
    EllipticOperator,
    SolveReport,
    assemble_operator,
    decay_coefficient_integral,
    energy_identity_gap,
    extract_decay_coefficient,
    laplace_beltrami,
    solve_dirichlet,
    solve_with_rhs,
)
from .errors import (
    BreakdownError,
    ConfigError,
    DefinitenessError,
    GateError,
    GridError,
    PositivityError,
    SupportError,
)
from .fields import Discretization, IsotropicExterior, MetricField, Region, ScalarField
from .geometry import (
    distributional_pairing,
    lp_norm,
    negative_part,
    riemannian_volume,
    scalar_curvature,
    sobolev_distance,
    sup_distance,
)
from .mollify import (
    ConvergenceTable,
    MollifierSpec,
    SmoothedMetric,
    convergence_table,
    equivalence_factor,
    mollify,
)
from .pipeline import PipelineConfig, PipelineResult, emit_report, parse_config, run_pipeline
from .scenarios import ScenarioSpec, ScenarioTruth, make_scenario, scenario_catalog

__version__ = "0.1.0"

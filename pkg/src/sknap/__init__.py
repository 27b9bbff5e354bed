"""Stochastic knapsack admission control.

Exact finite-horizon value tables for batch demand, structural checks
on the unit-demand value surface, a unit-demand relaxation bound,
switch-over policies tuned through a diffusion approximation, and
stream-paired policy simulation.
"""

from ._backend import BACKEND
from .bounds import (
    IndexOutOfRange,
    Relaxation,
    bound_table,
    dominance_gaps,
    unit_relaxation,
    upper_bound,
)
from .diffusion import (
    DegenerateVariance,
    DiffusionConfig,
    DiffusionSpec,
    FirstPassageHistogram,
    OptimizerFailure,
    PassageProblem,
    QuadratureNonConvergence,
    first_passage_density,
    fit_diffusion,
    mc_first_passage,
    mc_passage_times,
    optimize_switchover,
    phase_revenues,
    superpose,
)
from .dp import (
    DimensionMismatch,
    OptimalPolicy,
    ValueTable,
    extract_policy,
    solve_value_table,
    write_value_table,
)
from .model import (
    ClassMoments,
    EmptyClassSet,
    Instance,
    InstanceError,
    InstanceSyntaxError,
    InvalidInstance,
    PeriodOutOfRange,
    demand_moments,
    parse_instance,
    random_instance,
    validate_instance,
    write_instance,
)
from .policy import (
    PolicyState,
    ScheduleSyntaxError,
    SwitchoverSchedule,
    build_schedule,
    expected_volume,
    make_schedule,
    parse_schedule,
    switchover_curves,
    switchover_decision,
    write_schedule,
)
from .sim import (
    PERCENTILE_BANDS,
    SimResult,
    classify_percentile,
    draw_outcomes,
    result_line,
    simulate_policy,
)
from .structure import (
    DEFAULT_COUNTEREXAMPLE_SEED,
    PROPERTY_NAMES,
    NoViolationFound,
    PropertyCheck,
    PropertyReport,
    check_properties,
    figure_instance,
    find_counterexample,
    lift_crosscheck,
    report_lines,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # instances
    "Instance",
    "ClassMoments",
    "InstanceError",
    "InvalidInstance",
    "InstanceSyntaxError",
    "PeriodOutOfRange",
    "EmptyClassSet",
    "validate_instance",
    "demand_moments",
    "random_instance",
    "write_instance",
    "parse_instance",
    # exact solver
    "ValueTable",
    "OptimalPolicy",
    "DimensionMismatch",
    "solve_value_table",
    "extract_policy",
    "write_value_table",
    # structure of the value surface
    "PROPERTY_NAMES",
    "DEFAULT_COUNTEREXAMPLE_SEED",
    "NoViolationFound",
    "PropertyCheck",
    "PropertyReport",
    "check_properties",
    "lift_crosscheck",
    "figure_instance",
    "find_counterexample",
    "report_lines",
    # relaxation bound
    "IndexOutOfRange",
    "Relaxation",
    "unit_relaxation",
    "bound_table",
    "upper_bound",
    "dominance_gaps",
    # diffusion machinery
    "DegenerateVariance",
    "QuadratureNonConvergence",
    "OptimizerFailure",
    "DiffusionConfig",
    "DiffusionSpec",
    "PassageProblem",
    "FirstPassageHistogram",
    "fit_diffusion",
    "superpose",
    "first_passage_density",
    "mc_passage_times",
    "mc_first_passage",
    "phase_revenues",
    "optimize_switchover",
    # switch-over policies
    "ScheduleSyntaxError",
    "SwitchoverSchedule",
    "PolicyState",
    "expected_volume",
    "switchover_curves",
    "make_schedule",
    "switchover_decision",
    "build_schedule",
    "write_schedule",
    "parse_schedule",
    # simulation
    "PERCENTILE_BANDS",
    "SimResult",
    "draw_outcomes",
    "simulate_policy",
    "result_line",
    "classify_percentile",
]

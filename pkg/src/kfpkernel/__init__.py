"""Fundamental solutions of Kolmogorov-Fokker-Planck operators with time-dependent coefficients."""
from .cauchy import (
    BoundedCallable,
    GaussianGrowth,
    GridSampled,
    Horizon,
    SolveConfig,
    growth_class_certificate,
    horizon,
    initial_trace_report,
    reproduction_residual,
    solve_at,
)
from .covariance import (
    CovarianceBundle,
    covariance,
    integrate_covariance,
    model_covariance,
    ordering_check,
    propagator,
)
from .errors import (
    HorizonExceeded,
    KFPError,
    NumericError,
    RankDeficientBlock,
    ValidationError,
)
from .files import load_datum, load_problem, save_problem
from .kernel import (
    comparison_bounds,
    derivatives,
    gamma,
    gamma_model,
    log_gamma,
    short_time_upper,
)
from .operator import (
    BlockStructure,
    CoefficientTrack,
    OperatorSpec,
    coefficient_at,
    kalman_hypoelliptic,
    nu_of,
    validate_structure,
)

__version__ = "0.1.0"

__all__ = [
    "BlockStructure",
    "BoundedCallable",
    "CoefficientTrack",
    "CovarianceBundle",
    "GaussianGrowth",
    "GridSampled",
    "Horizon",
    "HorizonExceeded",
    "KFPError",
    "NumericError",
    "OperatorSpec",
    "RankDeficientBlock",
    "SolveConfig",
    "ValidationError",
    "coefficient_at",
    "comparison_bounds",
    "covariance",
    "derivatives",
    "gamma",
    "gamma_model",
    "growth_class_certificate",
    "horizon",
    "initial_trace_report",
    "integrate_covariance",
    "load_datum",
    "load_problem",
    "kalman_hypoelliptic",
    "log_gamma",
    "model_covariance",
    "nu_of",
    "ordering_check",
    "propagator",
    "reproduction_residual",
    "save_problem",
    "short_time_upper",
    "solve_at",
    "validate_structure",
]

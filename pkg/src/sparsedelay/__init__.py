"""Delay estimation between paired daily series.

Estimates the time offset at which one series best explains another, using
lagged association profiles and a sparsity-aware reconstruction of the first
series as a weighted superposition of shifted copies of the second.
"""

__version__ = "0.1.0"

from .assoc import (
    AssociationProfile,
    LagGrid,
    ShiftMatrix,
    association_at_lag,
    association_profile,
    build_shift_matrix,
    standardize,
    weight_matrix_diagonal,
)
from .bench import (
    EstimatorCell,
    ScenarioConfig,
    ScenarioResult,
    emit_table,
    mse_from_results,
    parse_mean_sd,
    resolve_workers,
    run_scenario,
)
from .errors import (
    AllZeroReconstruction,
    DegenerateGrid,
    EmptyPath,
    EmptySupport,
    InsufficientOverlap,
    LagOutOfRange,
    NonConvergence,
    NonPositiveAmount,
    SeriesFormatError,
    SparseDelayError,
    TooShort,
    ZeroVariance,
)
from .lasso import (
    LEAVE_ONE_OUT,
    CrossValidation,
    LassoFit,
    QuantileOfPath,
    SolutionPath,
    cv_errors,
    fit,
    lambda_max,
    select_lambda,
    solution_path,
    sparse_reconstruct,
)
from .regions import RegionParams, default_regions, load_regions, save_regions
from .seriesio import (
    SeriesRecord,
    manifest_path,
    read_series,
    series_text,
    write_manifest,
    write_series,
)
from .simulate import (
    MONTH_NAMES,
    AmountModel,
    ImpulseSpec,
    SimulatedPair,
    TransitionMatrix,
    estimate_transition_matrix,
    estimate_transition_matrix_pooled,
    fit_exponential_rate,
    impulse,
    month_of_day,
    simulate_occurrences,
    simulate_pair,
)
from .tde import (
    ESTIMATOR_ORDER,
    ESTIMATORS,
    AnnualSummary,
    EstimatorSpec,
    TdeResult,
    aggregate_years,
    best_lag,
    estimate_delay,
    estimate_delay_batch,
    no_correlation_pvalue,
    restrict_grid,
)

__all__ = [
    "__version__",
    # association profiles
    "AssociationProfile",
    "LagGrid",
    "ShiftMatrix",
    "association_at_lag",
    "association_profile",
    "build_shift_matrix",
    "standardize",
    "weight_matrix_diagonal",
    # sparse reconstruction
    "LEAVE_ONE_OUT",
    "CrossValidation",
    "LassoFit",
    "QuantileOfPath",
    "SolutionPath",
    "cv_errors",
    "fit",
    "lambda_max",
    "select_lambda",
    "solution_path",
    "sparse_reconstruct",
    # delay estimation
    "ESTIMATOR_ORDER",
    "ESTIMATORS",
    "AnnualSummary",
    "EstimatorSpec",
    "TdeResult",
    "aggregate_years",
    "best_lag",
    "estimate_delay",
    "estimate_delay_batch",
    "no_correlation_pvalue",
    "restrict_grid",
    # weather simulator
    "MONTH_NAMES",
    "AmountModel",
    "ImpulseSpec",
    "SimulatedPair",
    "TransitionMatrix",
    "estimate_transition_matrix",
    "estimate_transition_matrix_pooled",
    "fit_exponential_rate",
    "impulse",
    "month_of_day",
    "simulate_occurrences",
    "simulate_pair",
    # region parameter files
    "RegionParams",
    "default_regions",
    "load_regions",
    "save_regions",
    # benchmark harness
    "EstimatorCell",
    "ScenarioConfig",
    "ScenarioResult",
    "emit_table",
    "mse_from_results",
    "parse_mean_sd",
    "resolve_workers",
    "run_scenario",
    # series files and manifests
    "SeriesRecord",
    "manifest_path",
    "read_series",
    "series_text",
    "write_manifest",
    "write_series",
    # errors
    "SparseDelayError",
    "ZeroVariance",
    "LagOutOfRange",
    "DegenerateGrid",
    "NonConvergence",
    "EmptyPath",
    "AllZeroReconstruction",
    "InsufficientOverlap",
    "EmptySupport",
    "TooShort",
    "NonPositiveAmount",
    "SeriesFormatError",
]

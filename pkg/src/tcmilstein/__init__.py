"""Truncated Milstein solver and strong-convergence harness for
time-changed SDEs with super-linear coefficients."""

from .errors import ConfigError, NumericOverflowError, ResourceLimitError
from .mc_harness import (
    CoupledNoise,
    ErrorRow,
    ErrorTable,
    RegressionResult,
    aggregate,
    fit_convergence_order,
    generate_coupled_noise,
    strong_error_table,
    trajectory_rng,
)
from .problems import (
    AssumptionReport,
    SamplingSpec,
    check_assumptions,
    example1,
    example2,
    gbm,
)
from .scheme import (
    SchemeTag,
    SdeProblem,
    Trajectory,
    em_step,
    lg,
    milstein_step,
    simulate_path,
)
from .subordinator import (
    SubordinatorFamily,
    SubordinatorModel,
    TimeChangeGrid,
    build_time_change_grid,
    evaluate_inverse,
    inverse_index,
    sample_increment,
    sample_increments,
)
from .truncation import TruncationConfig, project, truncated_coefficients, truncation_radius

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "ConfigError",
    "CoupledNoise",
    "ErrorRow",
    "ErrorTable",
    "NumericOverflowError",
    "RegressionResult",
    "ResourceLimitError",
    "SamplingSpec",
    "SchemeTag",
    "SdeProblem",
    "SubordinatorFamily",
    "SubordinatorModel",
    "TimeChangeGrid",
    "Trajectory",
    "TruncationConfig",
    "aggregate",
    "build_time_change_grid",
    "check_assumptions",
    "em_step",
    "evaluate_inverse",
    "example1",
    "example2",
    "fit_convergence_order",
    "gbm",
    "generate_coupled_noise",
    "inverse_index",
    "lg",
    "milstein_step",
    "project",
    "sample_increment",
    "sample_increments",
    "simulate_path",
    "strong_error_table",
    "trajectory_rng",
    "truncated_coefficients",
    "truncation_radius",
]

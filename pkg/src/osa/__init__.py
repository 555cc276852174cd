"""Subspace approximation with outliers via adaptive residual sampling."""

__version__ = "0.1.0"

from .exceptions import BudgetExceeded, DegenerateWeights, DimensionMismatch, OSAError
from .geometry import (
    AffinePlacement,
    Basis,
    extend_basis,
    orthonormalize,
    project_onto,
    residual_norm,
    residual_norms,
    sin_angle,
    top_k_subspace,
)
from .losses import Huber, PthPower, Tukey, loss_eval, parse_loss
from .sampling import SampleTrace, adaptive_init, adaptive_round, residual_mass, residual_weights
from .solver import (
    SolveReport,
    SolverConfig,
    extract_k_subspace,
    inlier_count,
    line_solver,
    solve_outliers,
    trimmed_cost,
)
from .mestimators import MEstimatorConfig, m_estimator_solve
from .affine import AffineConfig, affine_solve, parallel_axis_check
from .oracle import OracleResult, delta_of_instance, exact_optimum_p2, exact_optimum_p_general
from .datagen import PlantedTruth, gen_affine_planted, gen_planted
from .diagnostics import diagnostics_angle_track, diagnostics_bad_set

__all__ = [
    "__version__",
    "OSAError",
    "DimensionMismatch",
    "DegenerateWeights",
    "BudgetExceeded",
    "Basis",
    "AffinePlacement",
    "extend_basis",
    "orthonormalize",
    "project_onto",
    "residual_norm",
    "residual_norms",
    "sin_angle",
    "top_k_subspace",
    "Huber",
    "PthPower",
    "Tukey",
    "loss_eval",
    "parse_loss",
    "SampleTrace",
    "adaptive_init",
    "adaptive_round",
    "residual_mass",
    "residual_weights",
    "SolveReport",
    "SolverConfig",
    "extract_k_subspace",
    "inlier_count",
    "line_solver",
    "solve_outliers",
    "trimmed_cost",
    "MEstimatorConfig",
    "m_estimator_solve",
    "AffineConfig",
    "affine_solve",
    "parallel_axis_check",
    "OracleResult",
    "delta_of_instance",
    "exact_optimum_p2",
    "exact_optimum_p_general",
    "PlantedTruth",
    "gen_affine_planted",
    "gen_planted",
    "diagnostics_angle_track",
    "diagnostics_bad_set",
]

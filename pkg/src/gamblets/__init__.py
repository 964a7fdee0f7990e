"""Operator-adapted multiresolution analysis and signal de-noising.

The package decomposes a symmetric positive definite operator (a
discretized elliptic PDE or a grounded graph Laplacian) over a nested
measurement hierarchy into uniformly conditioned detail blocks, and
uses the resulting coordinates to recover signals from noisy
measurements with a prior energy bound.
"""

from .errors import (
    BadConfig,
    BadLevel,
    DimensionMismatch,
    Disconnected,
    EmptyGrid,
    EmptyPointSet,
    GambletError,
    InvalidProbability,
    LevelZero,
    NoBracketWarning,
    NoConvergence,
    NotSPD,
    ShapeMismatch,
    TooFewLevels,
    TooLarge,
    UnsupportedDim,
)
from .numerics import (
    CholFactor,
    chi_square_quantile,
    cholesky,
    dump_matrix_csv,
    extreme_eigs,
    load_matrix_csv,
    solve_spd,
    spd_inverse,
    symmetrize,
)
from .hierarchy import Hierarchy, build_dyadic, build_from_points, hierarchy_from_json
from .operators import (
    CoefficientField,
    DiscreteOperator,
    GeometricGraph,
    assemble_fem,
    coeff_1d,
    coeff_2d,
    coeff_from_cells,
    coeff_unit,
    grounded_laplacian,
    load_graph,
    make_graph,
    measurement_overlap,
    parse_graph,
    synthetic_grid,
)
from .transform import (
    GambletSystem,
    MultiresCoefficients,
    analyze,
    coefficient_energies,
    energy_norm,
    load_system,
    oracle_transform,
    reconstruct,
    save_system,
    solve,
    transform,
    validate_system,
    z_matrix,
)
from .denoise import (
    METHODS,
    SIGNAL_MODES,
    DenoiseConfig,
    DenoiseResult,
    MethodStats,
    TrialStats,
    add_noise,
    default_threshold_grid,
    energy_growth_check,
    errors,
    gen_signal,
    hard_threshold,
    level_betas,
    level_filter,
    regularize,
    run_trials,
    select_level,
    soft_threshold,
    threshold_schedule,
    tune_threshold,
)
from .graphdenoise import (
    GraphDenoiseOutput,
    GraphScaleEstimate,
    denoise_graph,
    estimate_H_d,
    select_level_graph,
)

__version__ = "0.1.0"

__all__ = [
    "BadConfig", "BadLevel", "DimensionMismatch", "Disconnected", "EmptyGrid",
    "EmptyPointSet", "GambletError", "InvalidProbability", "LevelZero",
    "NoBracketWarning", "NoConvergence", "NotSPD", "ShapeMismatch",
    "TooFewLevels", "TooLarge", "UnsupportedDim",
    "CholFactor", "chi_square_quantile", "cholesky", "dump_matrix_csv",
    "extreme_eigs", "load_matrix_csv", "solve_spd", "spd_inverse", "symmetrize",
    "Hierarchy", "build_dyadic", "build_from_points", "hierarchy_from_json",
    "CoefficientField", "DiscreteOperator", "GeometricGraph", "assemble_fem",
    "coeff_1d", "coeff_2d", "coeff_from_cells", "coeff_unit",
    "grounded_laplacian", "load_graph", "make_graph", "measurement_overlap",
    "parse_graph", "synthetic_grid",
    "GambletSystem", "MultiresCoefficients", "analyze", "coefficient_energies",
    "energy_norm", "load_system", "oracle_transform", "reconstruct",
    "save_system", "solve", "transform", "validate_system", "z_matrix",
    "METHODS", "SIGNAL_MODES", "DenoiseConfig", "DenoiseResult", "MethodStats",
    "TrialStats", "add_noise", "default_threshold_grid", "energy_growth_check",
    "errors", "gen_signal", "hard_threshold", "level_betas", "level_filter",
    "regularize", "run_trials", "select_level", "soft_threshold",
    "threshold_schedule", "tune_threshold",
    "GraphDenoiseOutput", "GraphScaleEstimate", "denoise_graph",
    "estimate_H_d", "select_level_graph",
]

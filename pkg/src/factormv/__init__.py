"""Mean-variance portfolio selection under partial information.

A Gaussian-factor market where stock drifts load on unobserved
Ornstein-Uhlenbeck factors: the package solves the Kalman-Bucy filter,
the backward coefficient ODEs of the quadratic-hedging HJB equation, the
closed-form optimal strategy and the efficient frontier, and validates
everything by Monte Carlo simulation against independent oracles.
"""

from .errors import (
    DegenerateMarket,
    DimensionMismatch,
    FactorMVError,
    GridMismatch,
    LengthMismatch,
    NonFinite,
    NonPositiveScalar,
    NotPositiveDefinite,
    OutOfHorizon,
    SingularL,
    StepTooCoarse,
    Unsupported,
    ZeroInitialZ,
)
from .filterbank import (
    FilterSolution,
    FilterState,
    beta_hamiltonian,
    filter_step,
    run_filter,
    solve_beta,
)
from .hjbsolve import (
    HJBCoefficients,
    ResidualReport,
    f_value,
    hjb_residual,
    solve_G,
    solve_G_kron,
    solve_coefficients,
    solve_p,
    solve_q,
)
from .model import (
    MarketModel,
    PiecewiseConstant,
    TimeGrid,
    discount,
    gamma_sqrt,
    validate_model,
)
from .policy import (
    FrontierPoint,
    PolicyContext,
    expected_e2xi,
    frontier_point,
    frontier_sweep,
    gamma_star,
    lagrangian_value,
    make_policy,
    optimal_pi,
)
from .presets import PRESETS, preset
from .simkit import (
    E2xiEstimate,
    FilterReport,
    PathRecord,
    SimConfig,
    SimResult,
    estimate_e2xi_mc,
    simulate_one_path,
    simulate_paths,
    verify_filter_consistency,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateMarket", "DimensionMismatch", "FactorMVError", "GridMismatch",
    "LengthMismatch", "NonFinite", "NonPositiveScalar", "NotPositiveDefinite",
    "OutOfHorizon", "SingularL", "StepTooCoarse", "Unsupported", "ZeroInitialZ",
    "FilterSolution", "FilterState", "beta_hamiltonian", "filter_step",
    "run_filter", "solve_beta",
    "HJBCoefficients", "ResidualReport", "f_value", "hjb_residual",
    "solve_G", "solve_G_kron", "solve_coefficients", "solve_p", "solve_q",
    "MarketModel", "PiecewiseConstant", "TimeGrid", "discount", "gamma_sqrt",
    "validate_model",
    "FrontierPoint", "PolicyContext", "expected_e2xi", "frontier_point",
    "frontier_sweep", "gamma_star", "lagrangian_value", "make_policy",
    "optimal_pi",
    "PRESETS", "preset",
    "E2xiEstimate", "FilterReport", "PathRecord", "SimConfig", "SimResult",
    "estimate_e2xi_mc", "simulate_one_path", "simulate_paths",
    "verify_filter_consistency",
    "__version__",
]

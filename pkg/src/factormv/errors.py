"""Exception taxonomy shared across the package.

Every error raised on a user-facing code path is one of these, so callers
(and the command-line driver) can map failures to stable categories.
"""


class FactorMVError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(FactorMVError, ValueError):
    """An array argument has the wrong shape for the declared (m, n)."""


class NotPositiveDefinite(FactorMVError, ValueError):
    """A matrix required to be symmetric positive definite is not."""


class NonPositiveScalar(FactorMVError, ValueError):
    """A scalar that must be strictly positive (x0, s0, s_i, T) is not."""


class OutOfHorizon(FactorMVError, ValueError):
    """A time argument lies outside [0, T]."""


class GridMismatch(FactorMVError, ValueError):
    """A time is not a grid node, or a step/breakpoint does not align."""


class LengthMismatch(FactorMVError, ValueError):
    """A time series does not have one row per grid node."""


class StepTooCoarse(FactorMVError, RuntimeError):
    """An ODE solution lost symmetry/positivity; refine the grid."""


class SingularL(FactorMVError, RuntimeError):
    """The L factor of the Riccati linearization is numerically singular."""


class Unsupported(FactorMVError, ValueError):
    """The requested routine does not cover this model configuration."""


class DegenerateMarket(FactorMVError, ValueError):
    """rho = e^{-2 int r} E[e^{2 xi_T}] >= 1: the frontier degenerates."""


class ZeroInitialZ(FactorMVError, ValueError):
    """Initial z = x0 - alpha e^{-int r} is zero; ratio estimator undefined."""


class NonFinite(FactorMVError, FloatingPointError):
    """A non-finite value appeared during integration or simulation."""

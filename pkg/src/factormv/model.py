"""Market primitives: model container, validation, grids, discounting.

The market has one bond and m stocks whose excess returns are driven by n
unobserved Gaussian factors:

    dS0(t) = r(t) S0(t) dt
    dSi(t) = Si(t) [ (a + A y(t))_i dt + (sigma(t) dW(t))_i ],   i = 1..m
    dy(t)  = (d + D y(t)) dt + Lam dW(t),                        y(0) = y0

with W an (n+m)-dimensional Brownian motion, a in R^m, A in R^{m x n},
d in R^n, D in R^{n x n}, Lam in R^{n x (n+m)} and sigma(t) in
R^{m x (n+m)}. The short rate r(t) and the volatility sigma(t) are
piecewise constant with declared breakpoints; breakpoints must land on
nodes of whatever time grid the solvers use.

Only prices are observable. Everything downstream (filter, coefficient
ODEs, policy, simulator) consumes the validated model produced here.

Notation used across the package:

    Gamma(t)     = sigma sigma^T          (m x m, must be SPD)
    Sigma(t)     = Gamma(t)^{1/2}         (principal symmetric root)
    gamma_bar(t) = diag(Gamma(t))         (Ito correction for log prices)
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    GridMismatch,
    NonFinite,
    NonPositiveScalar,
    NotPositiveDefinite,
    OutOfHorizon,
)

#: relative eigenvalue floor for the SPD check on Gamma
EPS_PD = 1e-10


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous piecewise-constant function of time.

    ``values[i]`` applies on ``[breakpoints[i], breakpoints[i+1])`` and the
    last value extends to +inf. The leading breakpoint must be 0.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[0] != bp.shape[0]:
            raise DimensionMismatch(
                f"{bp.shape[0]} breakpoints but {vals.shape[0]} values")
        if bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise GridMismatch("breakpoints must be ascending and start at 0")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value):
        return cls(np.zeros(1), np.asarray([value], dtype=float))

    @property
    def n_segments(self):
        return self.breakpoints.shape[0]

    def segment_index(self, t):
        """Index of the segment containing t (right-continuous)."""
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return max(i, 0)

    def value(self, t):
        return self.values[self.segment_index(t)]

    def integral(self, t0, t1):
        """Exact integral over [t0, t1] (signed if t0 > t1)."""
        if t1 < t0:
            return -self.integral(t1, t0)
        edges = np.concatenate([self.breakpoints, [np.inf]])
        lo = np.maximum(edges[:-1], t0)
        hi = np.minimum(edges[1:], t1)
        lengths = np.clip(hi - lo, 0.0, None)
        return np.tensordot(lengths, self.values, axes=(0, 0))


def gamma_sqrt(gamma, eps_pd=EPS_PD):
    """Principal (symmetric positive definite) square root of an SPD matrix.

    Parameters
    ----------
    gamma : np.ndarray, shape (m, m)
        Symmetric positive definite matrix.
    eps_pd : float
        Relative eigenvalue floor; eigenvalues below eps_pd * max eigenvalue
        fail the SPD check.

    Returns
    -------
    np.ndarray, shape (m, m)
        Symmetric Sigma with Sigma @ Sigma = gamma.

    Raises
    ------
    NotPositiveDefinite
        If gamma is not symmetric positive definite at the tolerance.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {gamma.shape}")
    if not np.allclose(gamma, gamma.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(gamma).max()))):
        raise NotPositiveDefinite("matrix is not symmetric")
    w, v = np.linalg.eigh(gamma)
    if w[-1] <= 0.0 or w[0] <= eps_pd * w[-1]:
        raise NotPositiveDefinite(
            f"eigenvalues {w} fail the SPD floor {eps_pd} * lambda_max")
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


@dataclass(frozen=True)
class MarketModel:
    """Raw market specification. Run :func:`validate_model` before use.

    Fields follow the dynamics in the module docstring; ``s0`` and ``s``
    are the initial bond and stock prices, ``x0`` the initial wealth.
    """

    T: float
    x0: float
    s0: float
    s: np.ndarray
    y0: np.ndarray
    a: np.ndarray
    A: np.ndarray
    d: np.ndarray
    D: np.ndarray
    Lam: np.ndarray
    rate: PiecewiseConstant
    sigma: PiecewiseConstant
    validated: bool = field(default=False, compare=False)
    _derived: Optional[dict] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("s", "y0", "a", "d"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        for name in ("A", "D", "Lam"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if not isinstance(self.rate, PiecewiseConstant):
            object.__setattr__(self, "rate", PiecewiseConstant.constant(float(self.rate)))
        if not isinstance(self.sigma, PiecewiseConstant):
            sig = np.atleast_2d(np.asarray(self.sigma, dtype=float))
            object.__setattr__(self, "sigma", PiecewiseConstant(np.zeros(1), sig[None, :, :]))

    # -- dimensions ------------------------------------------------------
    @property
    def m(self):
        return self.a.shape[0]

    @property
    def n(self):
        return self.d.shape[0]

    # -- time-dependent coefficient lookups ------------------------------
    def r(self, t):
        return float(self.rate.value(t))

    def int_r(self, t0, t1):
        """Exact integral of the short rate over [t0, t1]."""
        return float(self.rate.integral(t0, t1))

    def _seg(self, t):
        if self._derived is None:
            raise RuntimeError("model accessors need validate_model() first")
        return self.sigma.segment_index(t)

    def sigma_at(self, t):
        return self.sigma.values[self._seg(t)]

    def gamma(self, t):
        return self._derived["gamma"][self._seg(t)]

    def gamma_inv(self, t):
        return self._derived["gamma_inv"][self._seg(t)]

    def sigma_sqrt(self, t):
        """Sigma(t) = Gamma(t)^{1/2}, symmetric."""
        return self._derived["sigma_sqrt"][self._seg(t)]

    def sigma_sqrt_inv(self, t):
        return self._derived["sigma_sqrt_inv"][self._seg(t)]

    def gamma_bar(self, t):
        """diag(Gamma(t)) as an m-vector (log-price Ito correction)."""
        return self._derived["gamma_bar"][self._seg(t)]

    def lam_sigma_T(self, t):
        """Lam sigma(t)^T, the n x m factor/price noise coupling."""
        return self._derived["lam_sigma_T"][self._seg(t)]

    def excess(self, t):
        """a - r(t) 1, the constant part of the excess return vector."""
        return self.a - self.r(t)


def validate_model(model):
    """Check dimensions, positivity and SPD-ness; attach derived caches.

    Idempotent: a model that already passed validation is returned as is.

    Raises
    ------
    DimensionMismatch, NonPositiveScalar, NotPositiveDefinite, NonFinite
    """
    if model.validated:
        return model
    m, n = model.m, model.n

    for name, val in (("T", model.T), ("x0", model.x0), ("s0", model.s0)):
        if not val > 0.0:
            raise NonPositiveScalar(f"{name} must be > 0, got {val}")
    if model.s.shape != (m,):
        raise DimensionMismatch(f"s must have shape ({m},), got {model.s.shape}")
    if np.any(model.s <= 0.0):
        raise NonPositiveScalar("all initial stock prices must be > 0")

    expected = {
        "y0": (model.y0, (n,)),
        "A": (model.A, (m, n)),
        "D": (model.D, (n, n)),
        "Lam": (model.Lam, (n, n + m)),
    }
    for name, (arr, shape) in expected.items():
        if arr.shape != shape:
            raise DimensionMismatch(f"{name} must have shape {shape}, got {arr.shape}")
    if model.sigma.values.ndim != 3 or model.sigma.values.shape[1:] != (m, n + m):
        raise DimensionMismatch(
            f"sigma segments must have shape ({m}, {n + m}), got {model.sigma.values.shape[1:]}")
    if model.rate.values.ndim != 1:
        raise DimensionMismatch("r must be scalar-valued")

    arrays = [model.s, model.y0, model.a, model.A, model.d, model.D,
              model.Lam, model.sigma.values, model.rate.values,
              np.asarray([model.T, model.x0, model.s0])]
    if not all(np.isfinite(arr).all() for arr in arrays):
        raise NonFinite("model contains non-finite entries")

    derived = {k: [] for k in ("gamma", "gamma_inv", "sigma_sqrt",
                               "sigma_sqrt_inv", "gamma_bar", "lam_sigma_T")}
    for sig in model.sigma.values:
        gam = sig @ sig.T
        root = gamma_sqrt(gam)  # raises NotPositiveDefinite
        derived["gamma"].append(gam)
        derived["gamma_inv"].append(np.linalg.inv(gam))
        derived["sigma_sqrt"].append(root)
        derived["sigma_sqrt_inv"].append(np.linalg.inv(root))
        derived["gamma_bar"].append(np.diag(gam).copy())
        derived["lam_sigma_T"].append(model.Lam @ sig.T)
    derived = {k: np.asarray(v) for k, v in derived.items()}
    return replace(model, validated=True, _derived=derived)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_N = T with h = T / N."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0.0:
            raise NonPositiveScalar(f"T must be > 0, got {self.T}")
        if self.n_steps < 1:
            raise GridMismatch("need at least one step")
        object.__setattr__(self, "_nodes", np.linspace(0.0, self.T, self.n_steps + 1))

    @property
    def h(self):
        return self.T / self.n_steps

    @property
    def nodes(self):
        return self._nodes

    def index(self, t, tol=None):
        """Node index of t; GridMismatch if t is not (close to) a node."""
        tol = 1e-9 * max(1.0, self.T) if tol is None else tol
        k = int(round(t / self.h))
        if k < 0 or k > self.n_steps or abs(t - k * self.h) > tol:
            raise GridMismatch(f"{t} is not a node of the {self.n_steps}-step grid")
        return k

    @classmethod
    def for_model(cls, model, n_steps):
        """Grid over [0, T] whose nodes absorb every r/sigma breakpoint."""
        grid = cls(model.T, n_steps)
        for bp in np.concatenate([model.rate.breakpoints, model.sigma.breakpoints]):
            if 0.0 < bp < model.T:
                k = round(bp / grid.h)
                if abs(bp - k * grid.h) > 1e-9 * max(1.0, model.T):
                    raise GridMismatch(
                        f"breakpoint {bp} does not land on a node with {n_steps} steps")
        return grid


def discount(model, t):
    """exp(-int_t^T r(s) ds), the bond discount from t to the horizon."""
    if t < 0.0 or t > model.T * (1.0 + 1e-12):
        raise OutOfHorizon(f"t={t} outside [0, {model.T}]")
    return float(np.exp(-model.int_r(t, model.T)))

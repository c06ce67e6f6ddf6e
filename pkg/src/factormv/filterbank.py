"""Kalman-Bucy filter for the unobserved factor process.

The investor observes prices only. With Y = log S, the innovation process

    dv(t) = Sigma(t)^{-1} [ dY(t) - (a + A yhat(t) - gamma_bar(t)/2) dt ]

is an m-dimensional Brownian motion in the observation filtration, and the
conditional mean yhat(t) = E[y(t) | prices up to t] follows

    dyhat = (d + D yhat) dt + Theta(t) dv,
    Theta(t) = (Lam sigma(t)^T + beta(t) A^T) Sigma(t)^{-1},

where the error covariance beta(t) = Cov(y - yhat) solves the forward
matrix Riccati equation

    dbeta/dt = D beta + beta D^T + Lam Lam^T
               - (Lam sigma^T + beta A^T) Gamma^{-1} (Lam sigma^T + beta A^T)^T,
    beta(0) = 0   (y0 is known exactly).

beta is deterministic, so it is solved once per grid and shared by the
coefficient ODEs, the policy and the simulator.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.linalg

from ._interp import HermitePath
from .errors import (
    DimensionMismatch,
    GridMismatch,
    LengthMismatch,
    NonFinite,
    OutOfHorizon,
    SingularL,
    StepTooCoarse,
    Unsupported,
)
from .model import TimeGrid, validate_model
from .rk4 import rk4_step

#: absolute-plus-relative tolerance for the symmetry / PSD step checks
TOL_PSD = 1e-10


def _beta_rhs(model):
    """Riccati right-hand side; t_seg picks the sigma/r segment."""
    A, D, Lam = model.A, model.D, model.Lam
    LLT = Lam @ Lam.T

    def rhs(t, beta, t_seg):
        M = model.lam_sigma_T(t_seg) + beta @ A.T
        return D @ beta + beta @ D.T + LLT - M @ model.gamma_inv(t_seg) @ M.T

    return rhs


@dataclass
class FilterSolution:
    """beta and the filter gain on a fixed grid.

    Attributes
    ----------
    grid : TimeGrid
    beta : np.ndarray, shape (N+1, n, n)
        Error covariance at the nodes.
    gain : np.ndarray, shape (N+1, n, m)
        Theta(t_k); treated as constant on [t_k, t_{k+1}) downstream.
    beta_path : HermitePath
        O(h^4) interpolant used by the coefficient ODE solvers.
    """

    grid: TimeGrid
    beta: np.ndarray
    gain: np.ndarray
    beta_path: HermitePath = field(repr=False)


def solve_beta(model, grid):
    """Integrate the error-covariance Riccati equation on the grid.

    Classical RK4 with re-symmetrization after every step. Raises
    StepTooCoarse if a step destroys symmetry or positive
    semidefiniteness beyond tolerance, NonFinite if the state explodes.
    """
    model = validate_model(model)
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid.for_model(model, int(grid))
    rhs = _beta_rhs(model)
    n, h = model.n, grid.h
    nodes = grid.nodes

    beta = np.zeros((grid.n_steps + 1, n, n))
    b = np.zeros((n, n))
    for k in range(grid.n_steps):
        mid = 0.5 * (nodes[k] + nodes[k + 1])
        b_next = rk4_step(lambda t, x: rhs(t, x, mid), nodes[k], b, h)
        if not np.isfinite(b_next).all():
            raise NonFinite(f"beta diverged in step {k}")
        scale = max(1.0, float(np.abs(b_next).max()))
        if np.abs(b_next - b_next.T).max() > TOL_PSD * scale:
            raise StepTooCoarse(f"beta lost symmetry at t={nodes[k + 1]:.6g}")
        b_next = 0.5 * (b_next + b_next.T)
        if np.linalg.eigvalsh(b_next)[0] < -TOL_PSD * scale:
            raise StepTooCoarse(f"beta lost positive semidefiniteness at t={nodes[k + 1]:.6g}")
        b = b_next
        beta[k + 1] = b

    gain = np.empty((grid.n_steps + 1, n, model.m))
    for k, t in enumerate(nodes):
        M = model.lam_sigma_T(t) + beta[k] @ model.A.T
        gain[k] = M @ model.sigma_sqrt_inv(t)

    path = HermitePath.from_rhs(nodes, beta, rhs)
    return FilterSolution(grid=grid, beta=beta, gain=gain, beta_path=path)


def beta_hamiltonian(model, t):
    """Error covariance at time t through the linear 2n x 2n flow.

    The Riccati equation linearizes: with

        Dt = D - Lam sigma^T Gamma^{-1} A
        Q  = Lam Lam^T - Lam sigma^T Gamma^{-1} sigma Lam^T
        R  = A^T Gamma^{-1} A

    the blocks K(t), L(t) of the linear system

        dK/dt = Dt K + Q L,   dL/dt = R K - Dt^T L,   K(0) = 0, L(0) = I

    satisfy beta(t) = K(t) L(t)^{-1} exactly. The flow matrix is constant
    (constant sigma only), so the solution is a single matrix exponential
    -- an independent cross-check for :func:`solve_beta`.

    Raises
    ------
    Unsupported
        If sigma is genuinely time-varying.
    SingularL
        If L(t) is numerically singular.
    """
    model = validate_model(model)
    if model.sigma.n_segments > 1:
        raise Unsupported("linearized beta requires constant sigma")
    if t < 0.0 or t > model.T * (1.0 + 1e-12):
        raise OutOfHorizon(f"t={t} outside [0, {model.T}]")
    n = model.n
    gi = model.gamma_inv(0.0)
    ls = model.lam_sigma_T(0.0)
    Dt = model.D - ls @ gi @ model.A
    Q = model.Lam @ model.Lam.T - ls @ gi @ ls.T
    R = model.A.T @ gi @ model.A

    flow = np.block([[Dt, Q], [R, -Dt.T]])
    Z0 = np.vstack([np.zeros((n, n)), np.eye(n)])
    Z = scipy.linalg.expm(flow * float(t)) @ Z0
    K, L = Z[:n], Z[n:]
    if np.linalg.cond(L) > 1e12:
        raise SingularL(f"L factor singular at t={t}")
    beta = K @ np.linalg.inv(L)
    return 0.5 * (beta + beta.T)


@dataclass(frozen=True)
class FilterState:
    """Running filter state: time, conditional factor mean, innovations."""

    t: float
    y_hat: np.ndarray
    innovations: Tuple[np.ndarray, ...] = ()


def _innovation(model, t, y_hat, d_log_price, dt):
    pred = (model.a + model.A @ y_hat - 0.5 * model.gamma_bar(t)) * dt
    return model.sigma_sqrt_inv(t) @ (d_log_price - pred)


def filter_step(model, fsol, state, d_log_price, dt):
    """Advance the filter by one grid step from an observed log-price move.

    Returns (new_state, dv). All coefficients (gain included) are taken at
    the left node, matching the simulator's discretization.
    """
    model = validate_model(model)
    grid = fsol.grid
    if abs(dt - grid.h) > 1e-9 * max(1.0, grid.T):
        raise GridMismatch(f"dt={dt} does not match the grid step {grid.h}")
    k = grid.index(state.t)
    if k >= grid.n_steps:
        raise OutOfHorizon("filter already at the horizon")
    d_log_price = np.asarray(d_log_price, dtype=float)
    if d_log_price.shape != (model.m,):
        raise DimensionMismatch(f"expected {(model.m,)} log-price increment, got {d_log_price.shape}")

    t = grid.nodes[k]
    dv = _innovation(model, t, state.y_hat, d_log_price, dt)
    y_next = state.y_hat + (model.d + model.D @ state.y_hat) * dt + fsol.gain[k] @ dv
    new_state = FilterState(t=grid.nodes[k + 1], y_hat=y_next,
                            innovations=state.innovations + (dv,))
    return new_state, dv


def run_filter(model, fsol, log_prices):
    """Filter a full log-price series sampled at the grid nodes.

    Parameters
    ----------
    log_prices : np.ndarray, shape (N+1, m)
        One row per node.

    Returns
    -------
    (y_hat, innovations) : shapes (N+1, n) and (N, m).
    """
    model = validate_model(model)
    grid = fsol.grid
    log_prices = np.asarray(log_prices, dtype=float)
    if log_prices.ndim != 2 or log_prices.shape[1] != model.m:
        raise DimensionMismatch(f"log-price series must be (N+1, {model.m})")
    if log_prices.shape[0] != grid.n_steps + 1:
        raise LengthMismatch(
            f"{log_prices.shape[0]} rows for a grid with {grid.n_steps + 1} nodes")

    h = grid.h
    y_hat = np.empty((grid.n_steps + 1, model.n))
    innov = np.empty((grid.n_steps, model.m))
    y_hat[0] = model.y0
    for k in range(grid.n_steps):
        t = grid.nodes[k]
        dv = _innovation(model, t, y_hat[k], log_prices[k + 1] - log_prices[k], h)
        innov[k] = dv
        y_hat[k + 1] = y_hat[k] + (model.d + model.D @ y_hat[k]) * h + fsol.gain[k] @ dv
    return y_hat, innov

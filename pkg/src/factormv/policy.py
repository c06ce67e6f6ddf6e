"""Optimal strategy, Lagrange multiplier and efficient frontier.

The mean-constrained problem min Var X(T) s.t. E X(T) = x_bar is solved
through the unconstrained quadratic-target family: with gamma the
multiplier and alpha = x_bar + gamma, the optimal policy is linear in the
surplus z = X - alpha e^{-int_t^T r} and the optimal objective value is

    J(gamma) = 1/2 (x0 - alpha e^{-int_0^T r})^2 E[e^{2 xi_T}] - 1/2 gamma^2,

an exactly quadratic, concave function of gamma whenever

    rho := e^{-2 int_0^T r} E[e^{2 xi_T}] < 1.

Maximizing gives gamma* = Delta rho / (1 - rho) with
Delta = x_bar - x0 e^{int r}, and the frontier variance
Var X(T) = 2 J(gamma*) = Delta^2 rho / (1 - rho).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMarket
from .hjbsolve import f_value
from .model import validate_model


def expected_e2xi(coeffs, y0):
    """E[e^{2 xi_T}] under the optimal policy: the value factor f(0, y0)."""
    return f_value(coeffs, 0.0, np.asarray(y0, dtype=float))


def _rho(model, e2xi):
    return float(np.exp(-2.0 * model.int_r(0.0, model.T)) * e2xi)


def lagrangian_value(model, e2xi, x_bar, gamma):
    """The dual objective J(gamma); 2*J(gamma*) is the frontier variance."""
    disc0 = np.exp(-model.int_r(0.0, model.T))
    z0 = model.x0 - (x_bar + gamma) * disc0
    return 0.5 * z0 * z0 * e2xi - 0.5 * gamma * gamma


def _check_target(model, x_bar):
    bond = model.x0 * float(np.exp(model.int_r(0.0, model.T)))
    if x_bar < bond * (1.0 - 1e-12):
        raise ValueError(
            f"target mean {x_bar} below risk-free growth {bond}; "
            "the frontier is defined for x_bar >= x0 e^(int r)")
    return bond


def gamma_star(x_bar, model, e2xi):
    """Exact maximizer of J: gamma* = Delta rho / (1 - rho).

    Raises DegenerateMarket when rho >= 1 (J is then non-concave and
    unbounded above: no finite multiplier exists).
    """
    model = validate_model(model)
    bond = _check_target(model, x_bar)
    rho = _rho(model, e2xi)
    if rho >= 1.0 - 1e-12:
        raise DegenerateMarket(
            f"rho = e^(-2 int r) E[e^(2 xi)] = {rho:.6g} >= 1; "
            "no finite Lagrange multiplier")
    return (x_bar - bond) * rho / (1.0 - rho)


def _gamma_star_variant(x_bar, model, e2xi):
    """Rejected multiplier formula, retained only for the erratum test.

    Uses the denominator e^{2 int r} E - 1 in place of e^{2 int r} - E.
    It is *not* a stationary point of J and does not reproduce the
    classical frontier Delta^2/(e^{theta^2 T} - 1); the test suite
    demonstrates the failure.
    """
    model = validate_model(model)
    bond = model.x0 * float(np.exp(model.int_r(0.0, model.T)))
    grow2 = float(np.exp(2.0 * model.int_r(0.0, model.T)))
    return (x_bar - bond) * e2xi / (grow2 * e2xi - 1.0)


@dataclass(frozen=True)
class FrontierPoint:
    x_bar: float
    gamma_star: float
    variance: float
    e2xi: float

    @property
    def stdev(self):
        return float(np.sqrt(self.variance))


def frontier_point(x_bar, model, coeffs):
    """Minimal terminal variance achieving mean x_bar.

    variance = 2 J(gamma*), evaluated in the algebraically reduced form
    Delta^2 rho/(1-rho) so that x_bar equal to the bond growth gives an
    exact zero.
    """
    model = validate_model(model)
    e2xi = expected_e2xi(coeffs, model.y0)
    g = gamma_star(x_bar, model, e2xi)
    rho = _rho(model, e2xi)
    bond = model.x0 * float(np.exp(model.int_r(0.0, model.T)))
    delta = x_bar - bond
    variance = delta * delta * rho / (1.0 - rho)
    return FrontierPoint(x_bar=float(x_bar), gamma_star=g,
                         variance=variance, e2xi=e2xi)


def frontier_sweep(x_bars, model, coeffs):
    """frontier_point for each target, reusing the solved coefficients."""
    return [frontier_point(xb, model, coeffs) for xb in x_bars]


@dataclass
class PolicyContext:
    """Everything the optimal policy needs, bound to one target mean."""

    model: object
    fsol: object
    coeffs: object
    x_bar: float
    gamma_star: float
    alpha: float            # shifted target x_bar + gamma*
    e2xi: float
    z0: float               # x0 - alpha e^{-int_0^T r}
    discounts: np.ndarray = field(repr=False)   # e^{-int_{t_k}^T r} per node


def make_policy(model, fsol, coeffs, x_bar):
    model = validate_model(model)
    if fsol.grid is not coeffs.grid and fsol.grid.n_steps != coeffs.grid.n_steps:
        raise ValueError("filter and coefficient grids differ")
    e2xi = expected_e2xi(coeffs, model.y0)
    g = gamma_star(x_bar, model, e2xi)
    alpha = x_bar + g
    disc = np.exp([-model.int_r(t, model.T) for t in coeffs.grid.nodes])
    return PolicyContext(model=model, fsol=fsol, coeffs=coeffs,
                         x_bar=float(x_bar), gamma_star=g, alpha=float(alpha),
                         e2xi=e2xi, z0=float(model.x0 - alpha * disc[0]),
                         discounts=disc)


def optimal_pi(ctx, t, X, y_hat):
    """Optimal stock allocation (cash amounts) at a grid node.

    pi = -Gamma^{-1} [V(t) + U(t) y_hat] (X - alpha e^{-int_t^T r}).
    Accepts a scalar X with y_hat of shape (n,), or batches X: (c,),
    y_hat: (c, n).
    """
    k = ctx.coeffs.grid.index(t)
    model = ctx.model
    gi = model.gamma_inv(ctx.coeffs.grid.nodes[k])
    y_hat = np.asarray(y_hat, dtype=float)
    z = np.asarray(X, dtype=float) - ctx.alpha * ctx.discounts[k]
    if y_hat.ndim == 1:
        signal = ctx.coeffs.V[k] + ctx.coeffs.U[k] @ y_hat
        return -(gi @ signal) * z
    signal = ctx.coeffs.V[k] + y_hat @ ctx.coeffs.U[k].T
    return -(signal @ gi) * z[..., None]

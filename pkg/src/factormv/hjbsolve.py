"""Backward coefficient ODEs for the value-function factor f(t, yhat).

Writing the auxiliary value factor as

    f(t, yhat) = exp( p(t) + q(t) . yhat + yhat . G(t) yhat ),

f solves the semilinear PDE (derived from the quadratic-hedging HJB
equation after the optimal control is substituted)

    f_t + 2 r f + f_y . (d + D yhat) + 1/2 Tr[ N f_yy ]
        - f * (B + M^T f_y / f) . Gamma^{-1} (B + M^T f_y / f) = 0,
    f(T, .) = 1,

with B = e + A yhat, e(t) = a - r(t) 1, M(t) = Lam sigma^T + beta(t) A^T
and N = M Gamma^{-1} M^T. Matching powers of yhat gives, in forward time,

    dG/dt = 2 G N G + A^T Gamma^{-1} A + C G + G C^T,          G(T) = 0,
    C     = 2 A^T Gamma^{-1} M^T - D^T,
    dq/dt = (C + 2 G N) q - 2 G d + 2 A^T Gamma^{-1} e
            + 4 G M Gamma^{-1} e,                              q(T) = 0,
    dp/dt = -2 r - d . q + 1/2 q . N q - Tr[N G]
            + e . Gamma^{-1} e + 2 e . Gamma^{-1} M^T q,       p(T) = 0.

The optimal fraction-of-surplus portfolio then reads off as

    pi(t, X, yhat) = -Gamma^{-1} [ V(t) + U(t) yhat ] (X - alpha B(t,T)),
    V = e + M^T q,    U = A + 2 M^T G.

All three equations are integrated backward with classical RK4 on the
shared grid; node tables plus Hermite interpolants (exact one-sided
derivatives from the right-hand sides) keep the chained solves and the
finite-difference residual probe at fourth order.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._interp import HermitePath
from .errors import GridMismatch, NonFinite, Unsupported
from .model import TimeGrid, validate_model
from .rk4 import rk4_step


def _mat_M(model, beta_t, t_seg):
    return model.lam_sigma_T(t_seg) + beta_t @ model.A.T


def _rhs_G(model, beta_path):
    A, D = model.A, model.D

    def rhs(t, G, t_seg):
        gi = model.gamma_inv(t_seg)
        M = _mat_M(model, beta_path(t), t_seg)
        N = M @ gi @ M.T
        C = 2.0 * A.T @ gi @ M.T - D.T
        return 2.0 * G @ N @ G + A.T @ gi @ A + C @ G + G @ C.T

    return rhs


def _rhs_q(model, beta_path, G_path):
    A, D, d = model.A, model.D, model.d

    def rhs(t, q, t_seg):
        gi = model.gamma_inv(t_seg)
        e = model.excess(t_seg)
        M = _mat_M(model, beta_path(t), t_seg)
        N = M @ gi @ M.T
        G = G_path(t)
        C = 2.0 * A.T @ gi @ M.T - D.T
        return ((C + 2.0 * G @ N) @ q - 2.0 * G @ d
                + 2.0 * A.T @ (gi @ e) + 4.0 * G @ M @ (gi @ e))

    return rhs


def _rhs_p(model, beta_path, G_path, q_path):
    d = model.d

    def rhs(t, p, t_seg):
        gi = model.gamma_inv(t_seg)
        e = model.excess(t_seg)
        M = _mat_M(model, beta_path(t), t_seg)
        N = M @ gi @ M.T
        G = G_path(t)
        q = q_path(t)
        return (-2.0 * model.r(t_seg) - d @ q + 0.5 * q @ N @ q
                - np.trace(N @ G) + e @ gi @ e + 2.0 * e @ gi @ (M.T @ q))

    return rhs


def _integrate_backward(grid, rhs, terminal, symmetrize=False):
    """March x' = rhs(t, x) from t = T down to 0, returning all node values.

    The RK4 step runs in reversed time s = T - t; coefficient segments are
    resolved at the interval midpoint, which is safe because the grid is
    breakpoint-aligned.
    """
    nodes = grid.nodes
    N = grid.n_steps
    out = np.zeros((N + 1,) + np.shape(terminal))
    out[N] = terminal
    x = np.asarray(terminal, dtype=float)
    h = grid.h
    for k in range(N, 0, -1):
        mid = 0.5 * (nodes[k - 1] + nodes[k])

        def back(s, xx):
            return -rhs(grid.T - s, xx, mid)

        x = rk4_step(back, grid.T - nodes[k], x, h)
        if not np.isfinite(x).all():
            raise NonFinite(f"coefficient ODE diverged near t={nodes[k - 1]:.6g}")
        if symmetrize:
            x = 0.5 * (x + x.T)
        out[k - 1] = x
    return out


def solve_G(model, fsol):
    """Quadratic coefficient G on the grid, shape (N+1, n, n)."""
    model = validate_model(model)
    return _integrate_backward(fsol.grid, _rhs_G(model, fsol.beta_path),
                               np.zeros((model.n, model.n)), symmetrize=True)


def solve_q(model, fsol, G):
    """Linear coefficient q on the grid, shape (N+1, n)."""
    model = validate_model(model)
    rhs_G = _rhs_G(model, fsol.beta_path)
    G_path = HermitePath.from_rhs(fsol.grid.nodes, G, rhs_G)
    return _integrate_backward(fsol.grid, _rhs_q(model, fsol.beta_path, G_path),
                               np.zeros(model.n))


def solve_p(model, fsol, G, q):
    """Scalar coefficient p on the grid, shape (N+1,)."""
    model = validate_model(model)
    rhs_G = _rhs_G(model, fsol.beta_path)
    G_path = HermitePath.from_rhs(fsol.grid.nodes, G, rhs_G)
    q_path = HermitePath.from_rhs(fsol.grid.nodes, q,
                                  _rhs_q(model, fsol.beta_path, G_path))
    return _integrate_backward(fsol.grid, _rhs_p(model, fsol.beta_path, G_path, q_path),
                               0.0)


def solve_G_kron(model, fsol):
    """G by exact variation of constants -- only when the equation is linear.

    When Lam = 0 the filter is exact (beta = 0, so M = 0), and when A = 0
    the quadratic and cross terms vanish identically; in either case the G
    equation degenerates to the Lyapunov-type linear ODE

        dG/dt = A^T Gamma^{-1} A - D^T G - G D,   G(T) = 0.

    Vectorized (row-major) this is dw/ds = P w - c on each sigma segment
    with constant P = D^T (x) I + I (x) D^T, solved segment-exactly with
    matrix exponentials. Raises Unsupported for models where M != 0.
    """
    model = validate_model(model)
    if not (np.all(model.Lam == 0.0) or np.all(model.A == 0.0)):
        raise Unsupported("exact linear route needs Lam = 0 or A = 0")
    grid = fsol.grid
    n, N, h = model.n, grid.n_steps, grid.h
    eye = np.eye(n)
    P = np.kron(model.D.T, eye) + np.kron(eye, model.D.T)
    # augmented exponential gives both e^{Ph} and int_0^h e^{P tau} dtau
    aug = np.zeros((2 * n * n, 2 * n * n))
    aug[:n * n, :n * n] = P
    aug[:n * n, n * n:] = np.eye(n * n)
    E = scipy.linalg.expm(aug * h)
    Eh, Phi = E[:n * n, :n * n], E[:n * n, n * n:]

    out = np.zeros((N + 1, n, n))
    w = np.zeros(n * n)
    for k in range(N, 0, -1):
        t_mid = 0.5 * (grid.nodes[k - 1] + grid.nodes[k])
        gi = model.gamma_inv(t_mid)
        c = (model.A.T @ gi @ model.A).reshape(-1)
        w = Eh @ w - Phi @ c
        out[k - 1] = 0.5 * (w.reshape(n, n) + w.reshape(n, n).T)
    return out


@dataclass
class HJBCoefficients:
    """Solved coefficient tables plus the interpolants that produced them."""

    grid: TimeGrid
    p: np.ndarray          # (N+1,)
    q: np.ndarray          # (N+1, n)
    G: np.ndarray          # (N+1, n, n)
    V: np.ndarray          # (N+1, m)   drift part of the portfolio signal
    U: np.ndarray          # (N+1, m, n) factor loading of the signal
    p_path: HermitePath = field(repr=False)
    q_path: HermitePath = field(repr=False)
    G_path: HermitePath = field(repr=False)


def solve_coefficients(model, fsol):
    """Solve G, q, p on fsol's grid and assemble the policy tables V, U."""
    model = validate_model(model)
    grid = fsol.grid
    nodes = grid.nodes
    beta_path = fsol.beta_path

    rhs_G = _rhs_G(model, beta_path)
    G = _integrate_backward(grid, rhs_G, np.zeros((model.n, model.n)),
                            symmetrize=True)
    G_path = HermitePath.from_rhs(nodes, G, rhs_G)

    rhs_q = _rhs_q(model, beta_path, G_path)
    q = _integrate_backward(grid, rhs_q, np.zeros(model.n))
    q_path = HermitePath.from_rhs(nodes, q, rhs_q)

    rhs_p = _rhs_p(model, beta_path, G_path, q_path)
    p = _integrate_backward(grid, rhs_p, 0.0)
    p_path = HermitePath.from_rhs(nodes, p, rhs_p)

    V = np.empty((grid.n_steps + 1, model.m))
    U = np.empty((grid.n_steps + 1, model.m, model.n))
    for k, t in enumerate(nodes):
        M = _mat_M(model, fsol.beta[k], t)
        V[k] = model.excess(t) + M.T @ q[k]
        U[k] = model.A + 2.0 * M.T @ G[k]
    return HJBCoefficients(grid=grid, p=p, q=q, G=G, V=V, U=U,
                           p_path=p_path, q_path=q_path, G_path=G_path)


def f_value(coeffs, t, y):
    """f(t, y) at a grid node t (GridMismatch otherwise)."""
    k = coeffs.grid.index(t)
    y = np.asarray(y, dtype=float)
    return float(np.exp(coeffs.p[k] + coeffs.q[k] @ y + y @ coeffs.G[k] @ y))


def _f_interp(coeffs, t, y):
    # off-node evaluation through the Hermite paths (residual probe only)
    return float(np.exp(coeffs.p_path(t) + coeffs.q_path(t) @ y
                        + y @ coeffs.G_path(t) @ y))


@dataclass(frozen=True)
class ResidualReport:
    h_fd: float
    ts: np.ndarray
    ys: np.ndarray
    residuals: np.ndarray   # normalized by f at the probe point

    @property
    def max_abs(self):
        return float(np.abs(self.residuals).max())


def hjb_residual(model, fsol, coeffs, n_points=100, h_fd=2.5e-4, seed=0, y_sigma=0.5):
    """Plug f back into the PDE at random interior points.

    Derivatives are central finite differences with step h_fd, taken on the
    Hermite-interpolated coefficient paths, so the reported residual decays
    like h_fd^2 until the interpolation floor. Probe times avoid coefficient
    breakpoints (f has a kink in t there) and keep a 2*h_fd margin from the
    horizon ends. Residuals are normalized by f, which is bounded away from
    zero.
    """
    model = validate_model(model)
    rng = np.random.default_rng(seed)
    T = model.T
    bps = np.union1d(model.rate.breakpoints, model.sigma.breakpoints)

    ts = np.empty(n_points)
    got = 0
    while got < n_points:
        t = rng.uniform(2.0 * h_fd, T - 2.0 * h_fd)
        if np.min(np.abs(bps - t)) > 2.0 * h_fd:
            ts[got] = t
            got += 1
    ys = model.y0 + y_sigma * rng.standard_normal((n_points, model.n))

    n = model.n
    res = np.empty(n_points)
    for i in range(n_points):
        t, y = ts[i], ys[i]
        F = lambda tt, yy: _f_interp(coeffs, tt, yy)
        f0 = F(t, y)
        ft = (F(t + h_fd, y) - F(t - h_fd, y)) / (2.0 * h_fd)
        fy = np.empty(n)
        fyy = np.empty((n, n))
        for a in range(n):
            ea = np.zeros(n)
            ea[a] = h_fd
            fp, fm = F(t, y + ea), F(t, y - ea)
            fy[a] = (fp - fm) / (2.0 * h_fd)
            fyy[a, a] = (fp - 2.0 * f0 + fm) / h_fd ** 2
        for a in range(n):
            for b in range(a + 1, n):
                ea = np.zeros(n)
                eb = np.zeros(n)
                ea[a] = h_fd
                eb[b] = h_fd
                mixed = (F(t, y + ea + eb) - F(t, y + ea - eb)
                         - F(t, y - ea + eb) + F(t, y - ea - eb)) / (4.0 * h_fd ** 2)
                fyy[a, b] = fyy[b, a] = mixed

        gi = model.gamma_inv(t)
        M = _mat_M(model, fsol.beta_path(t), t)
        Nmat = M @ gi @ M.T
        B = model.a + model.A @ y - model.r(t)
        w = B + M.T @ (fy / f0)
        res[i] = (ft + 2.0 * model.r(t) * f0 + fy @ (model.d + model.D @ y)
                  + 0.5 * np.trace(Nmat @ fyy) - f0 * (w @ gi @ w)) / f0
    return ResidualReport(h_fd=h_fd, ts=ts, ys=ys, residuals=res)

"""Monte Carlo validation engine.

Simulates the *true* market -- unobserved factors drive the stock drift
while the policy only ever sees filtered estimates -- and aggregates the
statistics needed to check the analytic results: terminal wealth moments,
the two E[e^{2 xi_T}] estimators, filter-error covariances at checkpoints
and innovation increment moments.

Scheme: Euler-Maruyama with one shared (n+m)-dimensional Brownian
increment array per path driving y, log S and X consistently,

    y_{k+1}    = y_k + (d + D y_k) h + Lam dW_k
    dY_k       = (a + A y_k - gamma_bar/2) h + sigma dW_k        (observed)
    dv_k       = Sigma^{-1} [dY_k - (a + A yhat_k - gamma_bar/2) h]
    yhat_{k+1} = yhat_k + (d + D yhat_k) h + Theta_k dv_k
    X_{k+1}    = g_k [ X_k + pi_k . (a + A y_k - r_k) h + pi_k . sigma dW_k ]

with g_k = exp(int_{t_k}^{t_{k+1}} r) the exact bond factor, so the
pi = 0 policy compounds the risk-free account without any error.

Randomness is counter-based: each path gets its own Philox stream keyed by
(master seed, path index), making every path's draws independent of the
number of paths, the chunking and the scheduling.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import GridMismatch, NonFinite, ZeroInitialZ
from .filterbank import solve_beta
from .model import TimeGrid, validate_model
from .policy import PolicyContext


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run parameters.

    step must subdivide the solver grid step exactly; checkpoints are
    times (step-aligned) at which filter-error moments are recorded;
    innovation_samples is how many steps get pooled into the innovation
    moment estimate (0 disables it).
    """

    n_paths: int
    step: float
    seed: int = 0
    record_terminal: bool = False
    checkpoints: tuple = ()
    innovation_samples: int = 16
    chunk_size: int = 1024


@dataclass(frozen=True)
class FilterCheckpoint:
    """Empirical moments of the filter error u = y - yhat at one time."""

    t: float
    mean: np.ndarray        # (n,)
    mean_se: np.ndarray
    cov: np.ndarray         # (n, n)
    cov_se: np.ndarray
    n_paths: int


@dataclass(frozen=True)
class InnovationStats:
    """Pooled moments of the innovation increments dv."""

    step: float
    mean: np.ndarray        # (m,)
    mean_se: np.ndarray
    cov: np.ndarray         # (m, m); compare against step * I
    cov_se: np.ndarray
    count: int


@dataclass
class SimResult:
    n_paths: int
    step: float
    seed: int
    mean: float
    variance: float
    mean_se: float
    var_se: float
    mean_half95: float
    var_half95: float
    # E[e^{2 xi}] estimators; nan unless run under an optimal-policy context
    e2xi: float = math.nan
    e2xi_se: float = math.nan
    e2xi_ratio: float = math.nan
    e2xi_ratio_se: float = math.nan
    e2xi_diff: float = math.nan
    e2xi_diff_se: float = math.nan
    checkpoints: dict = field(default_factory=dict)
    innovation: Optional[InnovationStats] = None
    terminal: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class E2xiEstimate:
    """Both E[e^{2 xi_T}] estimators; iterates as (estimate, se)."""

    estimate: float          # direct accumulation of xi along each path
    se: float
    ratio: float             # (z(T)/z0)^2 from the simulated wealth
    ratio_se: float
    diff: float              # paired difference estimate - ratio
    diff_se: float
    reference: float         # analytic f(0, y0)
    n_paths: int

    def __iter__(self):
        return iter((self.estimate, self.se))


@dataclass(frozen=True)
class PathRecord:
    """Full time series of a single simulated path."""

    t: np.ndarray            # (K+1,)
    y: np.ndarray            # (K+1, n)
    y_hat: np.ndarray        # (K+1, n)
    x: np.ndarray            # (K+1,)
    log_prices: np.ndarray   # (K+1, m)
    innovations: np.ndarray  # (K, m)


class _StepTables:
    """Per-simulation-step coefficient lookup, built once per run."""

    def __init__(self, model, fsol, cfg, ctx):
        grid = fsol.grid
        h = float(cfg.step)
        if h <= 0.0:
            raise GridMismatch(f"step must be > 0, got {h}")
        k_sub = int(round(grid.h / h))
        if k_sub < 1 or abs(grid.h - k_sub * h) > 1e-9 * grid.h:
            raise GridMismatch(
                f"sim step {h} does not subdivide the solver step {grid.h}")
        self.h = h
        self.k_sub = k_sub
        self.n_total = grid.n_steps * k_sub
        self.node_of = np.arange(self.n_total) // k_sub
        t_left = h * np.arange(self.n_total)
        t_mid = t_left + 0.5 * h

        self.g = np.exp([model.int_r(t, t + h) for t in t_left])
        self.r = np.array([model.r(t) for t in t_mid])
        self.seg = np.array([model.sigma.segment_index(t) for t in t_mid])
        der = model._derived
        self.sigT = [s.T.copy() for s in model.sigma.values]
        self.sinv = [m_.copy() for m_ in der["sigma_sqrt_inv"]]
        self.ginv = [m_.copy() for m_ in der["gamma_inv"]]
        self.gbar_half = [0.5 * v for v in der["gamma_bar"]]
        self.gain = fsol.gain[self.node_of]
        if ctx is not None:
            self.V = ctx.coeffs.V[self.node_of]
            self.U = ctx.coeffs.U[self.node_of]
            self.disc = ctx.discounts[self.node_of]


def _steps_for_times(times, h, n_total, what):
    out = []
    for t in times:
        k = int(round(t / h))
        if k < 1 or k > n_total or abs(k * h - t) > 1e-9 * max(1.0, n_total * h):
            raise GridMismatch(f"{what} time {t} is not a positive multiple of step {h}")
        out.append(k)
    return out


class _MomentAcc:
    """Streaming raw moments high enough for mean/variance SEs."""

    def __init__(self, shape_lin, shape_quad):
        self.n = 0
        self.s1 = np.zeros(shape_lin)
        self.s2 = np.zeros(shape_quad)
        self.s4 = np.zeros(shape_quad)

    def add_vectors(self, u):
        # u: (c, dim); quadratic moments of all pairwise products
        self.n += u.shape[0]
        self.s1 += u.sum(axis=0)
        prod = u[:, :, None] * u[:, None, :]
        self.s2 += prod.sum(axis=0)
        self.s4 += (prod * prod).sum(axis=0)

    def stats(self):
        n = self.n
        mean = self.s1 / n
        m2 = self.s2 / n - np.outer(mean, mean)
        mean_se = np.sqrt(np.clip(np.diag(m2), 0.0, None) / n)
        # SE of the covariance entries from the second moment of products
        var_prod = np.clip(self.s4 / n - (self.s2 / n) ** 2, 0.0, None)
        cov_se = np.sqrt(var_prod / n)
        return mean, mean_se, m2, cov_se, n


def _sim_core(model, policy, cfg, fsol, path_offset=0, record_series=False):
    model = validate_model(model)
    ctx = policy if isinstance(policy, PolicyContext) else None
    if ctx is not None:
        fsol = ctx.fsol
    if fsol is None:
        n_steps = int(round(model.T / cfg.step))
        fsol = solve_beta(model, TimeGrid.for_model(model, max(n_steps, 1)))
    tab = _StepTables(model, fsol, cfg, ctx)
    n, m = model.n, model.m
    K, h = tab.n_total, tab.h
    sqrt_h = math.sqrt(h)
    a, A, d, D, Lam = model.a, model.A, model.d, model.D, model.Lam
    x0 = model.x0

    ckpt_steps = _steps_for_times(cfg.checkpoints, h, K, "checkpoint")
    ckpt_acc = {k: _MomentAcc((n,), (n, n)) for k in ckpt_steps}
    if cfg.innovation_samples > 0:
        innov_steps = np.unique(np.round(
            np.linspace(0, K - 1, min(cfg.innovation_samples, K))).astype(int))
    else:
        innov_steps = np.empty(0, dtype=int)
    innov_acc = _MomentAcc((m,), (m, m)) if innov_steps.size else None
    innov_set = set(innov_steps.tolist())
    ckpt_set = {k - 1 for k in ckpt_steps}    # record after completing step k-1

    track_xi = ctx is not None
    ratio_ok = ctx is not None and abs(ctx.z0) > 1e-12 * max(1.0, abs(x0))
    # moments of X(T) shifted by path 0's terminal value: immune to the
    # catastrophic cancellation of raw moments (identical paths -> exactly 0)
    x_shift = None
    term = np.zeros(4)                        # sum (X-c)^k, k = 1..4
    wa_s = np.zeros(2)                        # e^{2 xi}: sum, sum of squares
    wb_s = np.zeros(2)                        # ((X_T - alpha)/z0)^2
    dd_s = np.zeros(2)                        # paired difference
    terminal = [] if cfg.record_terminal else None
    series = None

    for p0 in range(0, cfg.n_paths, cfg.chunk_size):
        c = min(cfg.chunk_size, cfg.n_paths - p0)
        buf = np.empty((c, K, n + m))
        for i in range(c):
            key = np.array([cfg.seed, path_offset + p0 + i], dtype=np.uint64)
            gen = np.random.Generator(np.random.Philox(key=key))
            buf[i] = gen.standard_normal((K, n + m))
        buf *= sqrt_h

        y = np.tile(model.y0, (c, 1))
        yh = y.copy()
        X = np.full(c, x0)
        xi = np.zeros(c) if track_xi else None
        if record_series:
            series = PathRecord(
                t=h * np.arange(K + 1),
                y=np.empty((K + 1, n)), y_hat=np.empty((K + 1, n)),
                x=np.empty(K + 1), log_prices=np.empty((K + 1, m)),
                innovations=np.empty((K, m)))
            series.y[0], series.y_hat[0], series.x[0] = y[0], yh[0], X[0]
            series.log_prices[0] = np.log(model.s)

        for k in range(K):
            s = tab.seg[k]
            dW = buf[:, k, :]
            sdW = dW @ tab.sigT[s]
            mu_y = a + y @ A.T
            mu_yh = a + yh @ A.T
            dY = (mu_y - tab.gbar_half[s]) * h + sdW
            dv = (dY - (mu_yh - tab.gbar_half[s]) * h) @ tab.sinv[s]

            if ctx is not None:
                S = tab.V[k] + yh @ tab.U[k].T
                SG = S @ tab.ginv[s]
                pi = -SG * (X - ctx.alpha * tab.disc[k])[:, None]
            elif policy is not None:
                pi = np.broadcast_to(
                    np.asarray(policy(k * h, X, yh), dtype=float), (c, m))
            else:
                pi = None

            if pi is None:
                X = tab.g[k] * X
            else:
                X = tab.g[k] * (X + ((mu_y - tab.r[k]) * pi).sum(1) * h
                                + (pi * sdW).sum(1))
            if not np.isfinite(X).all():
                raise NonFinite(f"wealth diverged at step {k} (step size too large?)")

            if track_xi:
                ell = S @ tab.sinv[s]
                xi += ((tab.r[k] - ((mu_yh - tab.r[k]) * SG).sum(1)
                        - 0.5 * (ell * ell).sum(1)) * h - (ell * dv).sum(1))

            y = y + (d + y @ D.T) * h + dW @ Lam.T
            yh = yh + (d + yh @ D.T) * h + dv @ tab.gain[k].T

            if k in innov_set:
                innov_acc.add_vectors(dv)
            if k in ckpt_set:
                ckpt_acc[k + 1].add_vectors(y - yh)
            if record_series:
                series.y[k + 1], series.y_hat[k + 1], series.x[k + 1] = y[0], yh[0], X[0]
                series.log_prices[k + 1] = series.log_prices[k] + dY[0]
                series.innovations[k] = dv[0]

        if x_shift is None:
            x_shift = float(X[0])
        xc = X - x_shift
        x2 = xc * xc
        term += (xc.sum(), x2.sum(), (x2 * xc).sum(), (x2 * x2).sum())
        if track_xi:
            wa = np.exp(2.0 * xi)
            wa_s += (wa.sum(), (wa * wa).sum())
            if ratio_ok:
                wb = ((X - ctx.alpha) / ctx.z0) ** 2
                wb_s += (wb.sum(), (wb * wb).sum())
                dd = wa - wb
                dd_s += (dd.sum(), (dd * dd).sum())
        if terminal is not None:
            terminal.append(X.copy())

    return _assemble_result(model, cfg, tab, x_shift, term, wa_s, wb_s, dd_s,
                            track_xi, ratio_ok, ckpt_acc, innov_acc,
                            terminal, series)


def _mean_se(sums, n):
    mean = sums[0] / n
    if n < 2:
        return mean, math.nan
    var = max(sums[1] / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def _assemble_result(model, cfg, tab, x_shift, term, wa_s, wb_s, dd_s,
                     track_xi, ratio_ok, ckpt_acc, innov_acc, terminal, series):
    N = cfg.n_paths
    d1 = term[0] / N                          # mean of the shifted sample
    mean = x_shift + d1
    m2 = term[1] / N - d1 ** 2
    m4 = (term[3] / N - 4.0 * d1 * term[2] / N
          + 6.0 * d1 ** 2 * term[1] / N - 3.0 * d1 ** 4)
    if N > 1:
        variance = max(m2, 0.0) * N / (N - 1)
        mean_se = math.sqrt(variance / N)
        var_se = math.sqrt(max(m4 - m2 * m2, 0.0) / N)
    else:
        variance = mean_se = var_se = math.nan

    res = SimResult(
        n_paths=N, step=tab.h, seed=cfg.seed,
        mean=float(mean), variance=float(variance),
        mean_se=float(mean_se), var_se=float(var_se),
        mean_half95=float(1.96 * mean_se), var_half95=float(1.96 * var_se),
        terminal=(np.concatenate(terminal) if terminal is not None else None))
    if track_xi:
        res.e2xi, res.e2xi_se = _mean_se(wa_s, N)
        if ratio_ok:
            res.e2xi_ratio, res.e2xi_ratio_se = _mean_se(wb_s, N)
            res.e2xi_diff, res.e2xi_diff_se = _mean_se(dd_s, N)
    for k, acc in ckpt_acc.items():
        u_mean, u_mean_se, u_cov, u_cov_se, n_acc = acc.stats()
        res.checkpoints[k * tab.h] = FilterCheckpoint(
            t=k * tab.h, mean=u_mean, mean_se=u_mean_se,
            cov=u_cov, cov_se=u_cov_se, n_paths=n_acc)
    if innov_acc is not None:
        v_mean, v_mean_se, v_cov, v_cov_se, cnt = innov_acc.stats()
        res.innovation = InnovationStats(step=tab.h, mean=v_mean,
                                         mean_se=v_mean_se, cov=v_cov,
                                         cov_se=v_cov_se, count=cnt)
    if series is not None:
        return res, series
    return res


def simulate_paths(model, policy, cfg, fsol=None):
    """Run the Monte Carlo experiment and aggregate statistics.

    policy may be a PolicyContext (optimal strategy; enables the xi
    estimators), a callable pi(t, X_batch, yhat_batch) -> (c, m) array,
    or None for the bond-only benchmark. fsol is taken from the context
    when one is given, and solved on a step-matched grid when omitted.
    """
    if cfg.n_paths < 1:
        raise ValueError("need at least one path")
    return _sim_core(model, policy, cfg, fsol)


def simulate_one_path(model, policy, cfg, fsol=None, path_index=0):
    """Full time series of one path (the stream keyed by path_index).

    Returns (SimResult, PathRecord); the record carries y, yhat, wealth,
    log prices and innovations at every simulation step.
    """
    cfg = replace(cfg, n_paths=1, record_terminal=False, checkpoints=(),
                  innovation_samples=0)
    return _sim_core(model, policy, cfg, fsol,
                     path_offset=path_index, record_series=True)


def estimate_e2xi_mc(model, ctx, cfg):
    """Monte Carlo E[e^{2 xi_T}] by both estimators (see E2xiEstimate).

    Raises ZeroInitialZ when the context's z0 vanishes (x_bar chosen so
    the initial surplus is zero): the wealth-ratio estimator is undefined
    there; perturb x_bar instead.
    """
    if abs(ctx.z0) <= 1e-12 * max(1.0, abs(ctx.model.x0)):
        raise ZeroInitialZ(
            "z0 = x0 - alpha e^{-int r} vanishes for this target; "
            "the (z(T)/z0)^2 estimator is undefined")
    res = simulate_paths(model, ctx, cfg)
    return E2xiEstimate(estimate=res.e2xi, se=res.e2xi_se,
                        ratio=res.e2xi_ratio, ratio_se=res.e2xi_ratio_se,
                        diff=res.e2xi_diff, diff_se=res.e2xi_diff_se,
                        reference=ctx.e2xi, n_paths=cfg.n_paths)


@dataclass(frozen=True)
class FilterReport:
    """Filter-error and innovation moments in standard-error units."""

    checkpoints: tuple       # of (t, emp_cov, ref_cov, cov_dev_se, mean_dev_se)
    innovation_dev_se: float
    innovation_mean_dev_se: float
    max_dev_se: float


def _dev_in_se(est, ref, se):
    dev = np.abs(np.asarray(est) - np.asarray(ref))
    se = np.asarray(se)
    out = np.zeros_like(dev)
    good = se > 0
    out[good] = dev[good] / se[good]
    out[~good & (dev > 0)] = math.inf
    return out


def verify_filter_consistency(model, cfg, checkpoints=None, fsol=None):
    """Compare empirical Cov(y - yhat) with beta(t) and dv moments with
    the Brownian law, all in standard-error units (policy plays no role,
    so the bond-only policy is used)."""
    model = validate_model(model)
    if checkpoints is None:
        checkpoints = (model.T / 4.0, model.T / 2.0, model.T)
    if fsol is None:
        n_steps = max(int(round(model.T / cfg.step)), 1)
        fsol = solve_beta(model, TimeGrid.for_model(model, n_steps))
    cfg = replace(cfg, checkpoints=tuple(checkpoints),
                  innovation_samples=max(cfg.innovation_samples, 8))
    res = simulate_paths(model, None, cfg, fsol=fsol)

    entries = []
    worst = 0.0
    for t in sorted(res.checkpoints):
        cp = res.checkpoints[t]
        ref = fsol.beta_path(t)
        cov_dev = _dev_in_se(cp.cov, ref, cp.cov_se)
        mean_dev = _dev_in_se(cp.mean, 0.0, cp.mean_se)
        entries.append((t, cp.cov, ref, cov_dev, mean_dev))
        worst = max(worst, float(cov_dev.max()), float(mean_dev.max()))
    inn = res.innovation
    inn_dev = float(_dev_in_se(inn.cov, inn.step * np.eye(model.m), inn.cov_se).max())
    inn_mean_dev = float(_dev_in_se(inn.mean, 0.0, inn.mean_se).max())
    worst = max(worst, inn_dev, inn_mean_dev)
    return FilterReport(checkpoints=tuple(entries), innovation_dev_se=inn_dev,
                        innovation_mean_dev_se=inn_mean_dev, max_dev_se=worst)

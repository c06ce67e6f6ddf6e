"""Command-line front end.

Four subcommands over a single JSON config:

    factormv solve    --config cfg.json [--out-dir DIR]
    factormv frontier --config cfg.json [--out-dir DIR]
    factormv simulate --config cfg.json [--paths N] [--step H] [--seed S]
                      [--xbar X] [--bond-only] [--out FILE]
    factormv filter   --config cfg.json --prices FILE [--out FILE]

Config schema (matrices are row-major nested arrays)::

    {
      "model": {"T":…, "x0":…, "s0":…, "s":[…], "y0":[…],
                "a":[…], "A":[[…]], "d":[…], "D":[[…]], "Lam":[[…]],
                "r": 0.04 | {"breakpoints":[0,…], "values":[…]},
                "sigma": [[…]] | {"breakpoints":[0,…], "values":[[[…]]…]}},
      "grid": {"steps": 2000},
      "sim": {"paths":…, "step":…, "seed":…, "xbar":…, "record_terminal":…},
      "frontier": {"xbar": […]},
      "output": {"dir": "."}
    }

All CSV output uses a header row and 17-significant-digit decimals; stdout
carries one machine-parsable key=value line per command. Exit codes:
0 success, 2 config/validation error, 3 solver failure, 4 degenerate
market, 5 non-finite simulation, 6 input series length mismatch.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import (
    DegenerateMarket,
    FactorMVError,
    LengthMismatch,
    NonFinite,
    SingularL,
    StepTooCoarse,
    Unsupported,
)
from .filterbank import run_filter, solve_beta
from .hjbsolve import solve_coefficients
from .model import MarketModel, PiecewiseConstant, TimeGrid, validate_model
from .policy import frontier_point, frontier_sweep, make_policy
from .simkit import SimConfig, simulate_paths


def _fmt(x):
    return format(float(x), ".17g")


def _piecewise(raw, matrix):
    if isinstance(raw, dict):
        return PiecewiseConstant(np.asarray(raw["breakpoints"], dtype=float),
                                 np.asarray(raw["values"], dtype=float))
    value = np.asarray(raw, dtype=float) if matrix else float(raw)
    return PiecewiseConstant.constant(value)


def config_to_model(mcfg):
    """Build a validated MarketModel from the config's model block."""
    arr = lambda key: np.asarray(mcfg[key], dtype=float)
    model = MarketModel(
        T=float(mcfg["T"]), x0=float(mcfg["x0"]),
        s0=float(mcfg["s0"]), s=arr("s"), y0=arr("y0"),
        a=arr("a"), A=arr("A"), d=arr("d"), D=arr("D"), Lam=arr("Lam"),
        rate=_piecewise(mcfg["r"], matrix=False),
        sigma=_piecewise(mcfg["sigma"], matrix=True),
    )
    return validate_model(model)


def model_to_config(model):
    """Inverse of config_to_model (single-segment blocks collapse)."""
    def pw(p, matrix):
        if p.n_segments == 1:
            v = p.values[0]
            return v.tolist() if matrix else float(v)
        return {"breakpoints": p.breakpoints.tolist(),
                "values": p.values.tolist()}
    return {
        "T": model.T, "x0": model.x0,
        "s0": model.s0, "s": model.s.tolist(),
        "y0": model.y0.tolist(), "a": model.a.tolist(),
        "A": model.A.tolist(), "d": model.d.tolist(),
        "D": model.D.tolist(), "Lam": model.Lam.tolist(),
        "r": pw(model.rate, matrix=False),
        "sigma": pw(model.sigma, matrix=True),
    }


def _load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _prepare(cfg):
    model = config_to_model(cfg["model"])
    steps = int(cfg.get("grid", {}).get("steps", 2000))
    grid = TimeGrid.for_model(model, steps)
    return model, grid


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _mat_labels(stub, nrow, ncol):
    return [f"{stub}_{i + 1}_{j + 1}" for i in range(nrow) for j in range(ncol)]


def cmd_solve(cfg, out_dir):
    model, grid = _prepare(cfg)
    fsol = solve_beta(model, grid)
    coeffs = solve_coefficients(model, fsol)
    n, m = model.n, model.m

    header = (["t", "p"] + [f"q_{i + 1}" for i in range(n)]
              + _mat_labels("G", n, n) + [f"V_{i + 1}" for i in range(m)]
              + _mat_labels("U", m, n) + _mat_labels("beta", n, n))
    rows = []
    for k, t in enumerate(grid.nodes):
        rows.append([t, coeffs.p[k], *coeffs.q[k], *coeffs.G[k].ravel(),
                     *coeffs.V[k], *coeffs.U[k].ravel(), *fsol.beta[k].ravel()])
    out = os.path.join(out_dir, "coefficients.csv")
    _write_csv(out, header, rows)

    e2xi = float(np.exp(coeffs.p[0] + coeffs.q[0] @ model.y0
                        + model.y0 @ coeffs.G[0] @ model.y0))
    print(f"cmd=solve steps={grid.n_steps} p0={_fmt(coeffs.p[0])} "
          f"e2xi={_fmt(e2xi)} out={out}")
    return 0


def cmd_frontier(cfg, out_dir):
    model, grid = _prepare(cfg)
    targets = [float(x) for x in cfg["frontier"]["xbar"]]
    fsol = solve_beta(model, grid)
    coeffs = solve_coefficients(model, fsol)
    points = frontier_sweep(targets, model, coeffs)
    out = os.path.join(out_dir, "frontier.csv")
    _write_csv(out, ["x_bar", "gamma_star", "variance", "stdev", "e2xi"],
               [[p.x_bar, p.gamma_star, p.variance, p.stdev, p.e2xi]
                for p in points])
    print(f"cmd=frontier targets={len(points)} e2xi={_fmt(points[0].e2xi)} out={out}")
    return 0


def cmd_simulate(cfg, out_dir, args):
    model, grid = _prepare(cfg)
    scfg = cfg.get("sim", {})
    n_paths = int(args.paths if args.paths is not None else scfg.get("paths", 10000))
    step = float(args.step if args.step is not None else scfg.get("step", grid.h))
    seed = int(args.seed if args.seed is not None else scfg.get("seed", 0))
    sim = SimConfig(n_paths=n_paths, step=step, seed=seed,
                    record_terminal=bool(scfg.get("record_terminal", False)))
    fsol = solve_beta(model, grid)
    bond = model.x0 * float(np.exp(model.int_r(0.0, model.T)))

    if args.bond_only:
        res = simulate_paths(model, None, sim, fsol=fsol)
        x_bar, target_var, e2xi_ref = bond, 0.0, float("nan")
        mean_ok = abs(res.mean - bond) <= 1e-12 * bond
        var_ok = res.variance <= 1e-16
    else:
        x_bar = float(args.xbar if args.xbar is not None
                      else scfg.get("xbar", 1.05 * bond))
        coeffs = solve_coefficients(model, fsol)
        ctx = make_policy(model, fsol, coeffs, x_bar)
        target_var = frontier_point(x_bar, model, coeffs).variance
        e2xi_ref = ctx.e2xi
        res = simulate_paths(model, ctx, sim)
        mean_ok = abs(res.mean - x_bar) <= 3.0 * res.mean_se
        var_ok = abs(res.variance - target_var) <= 3.0 * res.var_se

    out = args.out or os.path.join(out_dir, "simulation.csv")
    _write_csv(out,
               ["paths", "step", "seed", "x_bar", "mean", "mean_se",
                "variance", "var_se", "target_mean", "target_variance",
                "e2xi_mc", "e2xi_mc_se", "e2xi_ref"],
               [[n_paths, step, seed, x_bar, res.mean, res.mean_se,
                 res.variance, res.var_se, x_bar, target_var,
                 res.e2xi, res.e2xi_se, e2xi_ref]])
    if res.terminal is not None:
        _write_csv(os.path.join(out_dir, "paths.csv"), ["path", "x_T"],
                   [[i, x] for i, x in enumerate(res.terminal)])

    print(f"cmd=simulate paths={n_paths} step={_fmt(step)} seed={seed} "
          f"mean={_fmt(res.mean)} variance={_fmt(res.variance)} "
          f"mean_check={'PASS' if mean_ok else 'FAIL'} "
          f"var_check={'PASS' if var_ok else 'FAIL'} out={out}")
    return 0


def cmd_filter(cfg, out_dir, args):
    model, grid = _prepare(cfg)
    with open(args.prices, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        data = np.array([[float(x) for x in row] for row in reader])
    if data.ndim != 2 or data.shape[1] != model.m + 1:
        raise LengthMismatch(
            f"price file needs 1+{model.m} columns (t, log prices), "
            f"got {0 if data.ndim != 2 else data.shape[1]}")
    fsol = solve_beta(model, grid)
    y_hat, innov = run_filter(model, fsol, data[:, 1:])

    out = args.out or os.path.join(out_dir, "filter.csv")
    n = model.n
    header = (["t"] + [f"yhat_{i + 1}" for i in range(n)]
              + [f"dv_{j + 1}" for j in range(model.m)])
    rows = [[grid.nodes[0], *y_hat[0], *[float("nan")] * model.m]]
    for k in range(1, grid.n_steps + 1):
        rows.append([grid.nodes[k], *y_hat[k], *innov[k - 1]])
    _write_csv(out, header, rows)
    print(f"cmd=filter rows={len(rows)} "
          f"max_abs_dv={_fmt(np.abs(innov).max())} out={out}")
    return 0


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config path")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")

    ap = argparse.ArgumentParser(
        prog="factormv",
        description="mean-variance portfolio engine under partial information")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common],
                   help="solve filter + coefficient ODEs, write tables")
    sub.add_parser("frontier", parents=[common],
                   help="efficient frontier for the config targets")
    sim = sub.add_parser("simulate", parents=[common],
                         help="Monte Carlo validation run")
    sim.add_argument("--paths", type=int, default=None)
    sim.add_argument("--step", type=float, default=None)
    sim.add_argument("--xbar", type=float, default=None)
    sim.add_argument("--bond-only", action="store_true",
                     help="simulate the pi=0 benchmark instead of the optimal policy")
    sim.add_argument("--out", default=None, help="summary CSV path")
    flt = sub.add_parser("filter", parents=[common],
                         help="run the filter over an observed price CSV")
    flt.add_argument("--prices", required=True, help="CSV of t, log prices")
    flt.add_argument("--out", default=None, help="filter CSV path")
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        out_dir = args.out_dir
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(cfg, out_dir)
        if args.command == "frontier":
            return cmd_frontier(cfg, out_dir)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, args)
        return cmd_filter(cfg, out_dir, args)
    except DegenerateMarket as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NonFinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except LengthMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 6
    except (StepTooCoarse, SingularL, Unsupported) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FactorMVError, ValueError, KeyError, TypeError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Run the optimal strategy through the Monte Carlo engine and compare the
realized moments with their predicted values.

Also walks through one simulated path step by step at a few dates, showing
the filtered factor, the surplus z and the stock position, which is the
quickest way to get a feel for how the policy trades.
"""

import numpy as np

from factormv import (SimConfig, frontier_point, make_policy, optimal_pi,
                      preset, simulate_one_path, simulate_paths, solve_beta,
                      solve_coefficients)

INSTANCE = "scalar_coupled"
N_GRID = 1000
N_PATHS = 20000
SEED = 0


def main():
    model = preset(INSTANCE)
    fsol = solve_beta(model, N_GRID)
    coeffs = solve_coefficients(model, fsol)
    bond = model.x0 * float(np.exp(model.int_r(0.0, model.T)))

    print(f"instance {INSTANCE}: bond growth {bond:.6f}")
    print(f"{'x_bar':>8} {'mean(MC)':>12} {'dev':>8} {'var(MC)':>12} "
          f"{'var(pred)':>12} {'dev':>8}")
    for x_bar in (1.05, 1.08, 1.12):
        ctx = make_policy(model, fsol, coeffs, x_bar)
        fp = frontier_point(x_bar, model, coeffs)
        res = simulate_paths(model, ctx,
                             SimConfig(n_paths=N_PATHS, step=model.T / N_GRID,
                                       seed=SEED))
        print(f"{x_bar:8.3f} {res.mean:12.6f} "
              f"{(res.mean - x_bar) / res.mean_se:+7.2f}s {res.variance:12.6f} "
              f"{fp.variance:12.6f} {(res.variance - fp.variance) / res.var_se:+7.2f}s")

    print("\none path under the x_bar = 1.08 policy:")
    ctx = make_policy(model, fsol, coeffs, 1.08)
    _, rec = simulate_one_path(model, ctx,
                               SimConfig(n_paths=1, step=model.T / N_GRID, seed=3))
    print(f"{'t':>6} {'y':>9} {'yhat':>9} {'wealth':>9} {'surplus z':>10} {'stock pos':>10}")
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        k = round(frac * N_GRID)
        t = rec.t[k]
        z = rec.x[k] - ctx.alpha * ctx.discounts[k]
        pi = optimal_pi(ctx, t, rec.x[k], rec.y_hat[k])
        print(f"{t:6.2f} {rec.y[k][0]:9.4f} {rec.y_hat[k][0]:9.4f} "
              f"{rec.x[k]:9.4f} {z:10.4f} {pi[0]:10.4f}")
    print("\n(the position is proportional to -z: behind the target the "
          "strategy risks more, at z = 0 it retires into the bond)")


if __name__ == "__main__":
    main()

"""Piecewise-cubic Hermite evaluation of ODE solution paths.

Solvers in this package hand their results downstream (beta feeds the G
equation, G feeds q, q feeds p, and the PDE residual check differentiates
everything). Downstream Runge-Kutta stages need values between nodes, and
a piecewise-constant or linear lookup would cap the global order of the
whole chain. Storing the node values together with the one-sided interval
derivatives (known exactly from the ODE right-hand side) gives an O(h^4)
local cubic without any extra solver state.

Model coefficients (r, sigma) may jump at nodes, so each interval carries
its own derivative pair: d_right[k] at the left endpoint of interval k and
d_left[k] at its right endpoint, both evaluated with interval-k
coefficients.
"""

import numpy as np


class HermitePath:
    """Cubic-Hermite interpolant on a uniform node grid."""

    def __init__(self, nodes, values, d_right, d_left):
        self.nodes = np.asarray(nodes, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.d_right = np.asarray(d_right, dtype=float)
        self.d_left = np.asarray(d_left, dtype=float)
        self._t0 = float(self.nodes[0])
        self._t1 = float(self.nodes[-1])
        self._h = (self._t1 - self._t0) / (len(self.nodes) - 1)

    @classmethod
    def from_rhs(cls, nodes, values, rhs):
        """Build a path from node values and the ODE right-hand side.

        rhs(t, x, t_seg) must evaluate the derivative at time t for state
        x, looking any piecewise-constant model coefficient up at time
        t_seg (a point strictly inside the interval, so the correct
        segment is used on both sides of a jump).
        """
        nodes = np.asarray(nodes, dtype=float)
        n_iv = len(nodes) - 1
        d_right = np.empty((n_iv,) + np.shape(values[0]))
        d_left = np.empty_like(d_right)
        for k in range(n_iv):
            mid = 0.5 * (nodes[k] + nodes[k + 1])
            d_right[k] = rhs(nodes[k], values[k], mid)
            d_left[k] = rhs(nodes[k + 1], values[k + 1], mid)
        return cls(nodes, values, d_right, d_left)

    def __call__(self, t):
        t = float(t)
        tol = 1e-9 * max(1.0, abs(self._t1))
        if t < self._t0 - tol or t > self._t1 + tol:
            raise ValueError(f"time {t} outside path range [{self._t0}, {self._t1}]")
        t = min(max(t, self._t0), self._t1)
        x = (t - self._t0) / self._h
        k = min(int(x), len(self.nodes) - 2)
        u = x - k
        # Hermite basis on [0, 1]
        u2 = u * u
        u3 = u2 * u
        h00 = 2.0 * u3 - 3.0 * u2 + 1.0
        h10 = u3 - 2.0 * u2 + u
        h01 = -2.0 * u3 + 3.0 * u2
        h11 = u3 - u2
        return (h00 * self.values[k] + h01 * self.values[k + 1]
                + self._h * (h10 * self.d_right[k] + h11 * self.d_left[k]))

"""Classical fourth-order Runge-Kutta step.

Kept deliberately tiny: the solvers in this package integrate on fixed
grids (breakpoints of the piecewise-constant coefficients must land on
nodes), so adaptive stepping buys nothing and would complicate the
refinement-order tests.
"""


def rk4_step(f, t, x, h):
    """Advance x by one RK4 step of size h for dx/dt = f(t, x).

    Parameters
    ----------
    f : callable
        Right-hand side, f(t, x) -> same shape as x. x may be any object
        supporting + and scalar *, e.g. an ndarray or a tuple-wrapping
        state class.
    t : float
        Current time.
    x : array_like
        Current state.
    h : float
        Step size (may be negative).

    Returns
    -------
    Next state at t + h.
    """
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

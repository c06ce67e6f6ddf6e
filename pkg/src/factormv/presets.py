"""Ready-made market instances used by the tests, demos and CLI examples.

Each builder returns a validated MarketModel with T = 1. The set is chosen
to hit every structural regime of the engine:

* ``classical``            -- A = 0: factors do not enter the drift, the
                              problem collapses to complete-information
                              mean-variance with closed-form frontier.
* ``scalar_coupled``       -- n = m = 1 with genuine filtering (A != 0,
                              Lam != 0); the workhorse instance.
* ``generic_2x2``          -- n = m = 2, full coupling, no special structure.
* ``deterministic_factor`` -- Lam = 0: the factor path is deterministic, so
                              beta stays 0 and the value function has an
                              independent quadrature representation.
* ``piecewise``            -- A = 0 with piecewise-constant r and sigma.
"""

import numpy as np

from .model import MarketModel, PiecewiseConstant, validate_model


def classical():
    # two stocks, one factor that never feeds back into the stock drift
    return validate_model(MarketModel(
        T=1.0,
        x0=1.0,
        s0=1.0,
        s=np.array([1.0, 1.0]),
        y0=np.array([0.2]),
        a=np.array([0.09, 0.05]),
        A=np.zeros((2, 1)),
        d=np.array([0.01]),
        D=np.array([[-0.5]]),
        Lam=np.array([[0.12, 0.08, 0.0]]),
        rate=0.04,
        sigma=np.array([[0.20, 0.0, 0.0],
                        [0.12, 0.25, 0.0]]),
    ))


def scalar_coupled():
    """One stock whose drift loads on one mean-reverting factor."""
    return validate_model(MarketModel(
        T=1.0,
        x0=1.0,
        s0=1.0,
        s=np.array([1.0]),
        y0=np.array([0.1]),
        a=np.array([0.05]),
        A=np.array([[0.8]]),
        d=np.array([0.04]),
        D=np.array([[-0.6]]),
        Lam=np.array([[0.12, 0.06]]),
        rate=0.03,
        sigma=np.array([[0.22, 0.0]]),
    ))


def generic_2x2():
    """Two stocks, two factors, dense coupling on both sides."""
    return validate_model(MarketModel(
        T=1.0,
        x0=1.0,
        s0=1.0,
        s=np.array([1.0, 1.0]),
        y0=np.array([0.05, -0.10]),
        a=np.array([0.07, 0.045]),
        A=np.array([[0.5, -0.2],
                    [0.15, 0.35]]),
        d=np.array([0.02, -0.01]),
        D=np.array([[-0.7, 0.1],
                    [0.0, -0.4]]),
        Lam=np.array([[0.15, 0.05, 0.02, 0.00],
                      [0.04, 0.12, 0.00, 0.03]]),
        rate=0.025,
        sigma=np.array([[0.21, 0.00, 0.0, 0.0],
                        [0.06, 0.19, 0.0, 0.0]]),
    ))


def deterministic_factor():
    """Same market as generic_2x2 but with a noiseless factor (Lam = 0)."""
    base = generic_2x2()
    return validate_model(MarketModel(
        T=base.T, x0=base.x0, s0=base.s0, s=base.s, y0=base.y0,
        a=base.a, A=base.A, d=base.d, D=base.D,
        Lam=np.zeros((2, 4)),
        rate=0.025,
        sigma=np.array([[0.21, 0.00, 0.0, 0.0],
                        [0.06, 0.19, 0.0, 0.0]]),
    ))


def piecewise():
    # rate jumps at t = 0.5, volatility re-scales at t = 0.25
    return validate_model(MarketModel(
        T=1.0,
        x0=1.0,
        s0=1.0,
        s=np.array([1.0, 1.0]),
        y0=np.array([0.0]),
        a=np.array([0.06, 0.04]),
        A=np.zeros((2, 1)),
        d=np.array([0.0]),
        D=np.array([[-0.5]]),
        Lam=np.array([[0.10, 0.05, 0.0]]),
        rate=PiecewiseConstant(
            breakpoints=np.array([0.0, 0.5]),
            values=np.array([0.02, 0.05]),
        ),
        sigma=PiecewiseConstant(
            breakpoints=np.array([0.0, 0.25]),
            values=np.array([[[0.200, 0.000, 0.0],
                              [0.100, 0.220, 0.0]],
                             [[0.230, 0.000, 0.0],
                              [0.115, 0.253, 0.0]]]),
        ),
    ))


#: name -> builder, in the order the acceptance suite sweeps them
PRESETS = {
    "classical": classical,
    "scalar_coupled": scalar_coupled,
    "generic_2x2": generic_2x2,
    "deterministic_factor": deterministic_factor,
    "piecewise": piecewise,
}


def preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None

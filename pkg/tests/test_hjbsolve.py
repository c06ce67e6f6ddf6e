"""Backward-coefficient tests.

Two independent oracles pin the solvers down:

* an exact matrix-exponential route for the linear special cases of the
  G equation (solve_G_kron), and
* a transport identity for noiseless factors: with Lam = 0 the factor path
  is deterministic, so E[e^{2 xi_T}] is a plain time integral along the
  characteristic, computable to quadrature accuracy without touching the
  coefficient ODEs at all.
"""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from factormv import presets
from factormv.errors import GridMismatch, Unsupported
from factormv.filterbank import solve_beta
from factormv.hjbsolve import (f_value, hjb_residual, solve_coefficients,
                               solve_G, solve_G_kron, solve_p, solve_q)

# frozen regression values, N = 800 grid
SCALAR_N800 = {
    "p0": 0.0001786553945693709,
    "q0": -0.426013815564787,
    "G0": -4.358926603001817,
    "betaT": 0.0015094493352605248,
    "e2xi": 0.9175832273199992,
}
GENERIC_N800 = {
    "p0": -0.033740865279332004,
    "q0": [-0.516672822832308, 0.1723466167253208],
    "G0": [[-2.0196580850804833, 0.9202536090071265],
           [0.9202536090071265, -2.5877932382045383]],
    "betaT": [[0.00016732588191707094, 1.835633076797439e-05],
              [1.835633076797439e-05, 0.0005146137995210448]],
    "e2xi": 0.88963965365396,
}


def test_terminal_conditions(solved_scalar):
    m, _, co = solved_scalar
    assert co.p[-1] == 0.0
    assert np.array_equal(co.q[-1], np.zeros(m.n))
    assert np.array_equal(co.G[-1], np.zeros((m.n, m.n)))
    assert np.allclose(co.V[-1], m.excess(m.T), atol=1e-15)
    assert np.allclose(co.U[-1], m.A, atol=1e-13)


def test_frozen_values_scalar():
    m = presets.preset("scalar_coupled")
    fs = solve_beta(m, 800)
    co = solve_coefficients(m, fs)
    assert fs.beta[-1][0, 0] == pytest.approx(SCALAR_N800["betaT"], rel=1e-12)
    assert co.p[0] == pytest.approx(SCALAR_N800["p0"], rel=1e-11)
    assert co.q[0][0] == pytest.approx(SCALAR_N800["q0"], rel=1e-12)
    assert co.G[0][0, 0] == pytest.approx(SCALAR_N800["G0"], rel=1e-12)
    f0 = f_value(co, 0.0, m.y0)
    assert f0 == pytest.approx(SCALAR_N800["e2xi"], rel=1e-12)


def test_frozen_values_generic():
    m = presets.preset("generic_2x2")
    fs = solve_beta(m, 800)
    co = solve_coefficients(m, fs)
    assert np.allclose(fs.beta[-1], GENERIC_N800["betaT"], rtol=1e-11, atol=1e-18)
    assert co.p[0] == pytest.approx(GENERIC_N800["p0"], rel=1e-11)
    assert np.allclose(co.q[0], GENERIC_N800["q0"], rtol=1e-11)
    assert np.allclose(co.G[0], GENERIC_N800["G0"], rtol=1e-11)
    assert f_value(co, 0.0, m.y0) == pytest.approx(GENERIC_N800["e2xi"], rel=1e-11)


def test_decoupled_observation_matrix_gives_zero_q_and_G(solved_classical,
                                                         solved_piecewise):
    # with A = 0 the q and G equations have zero forcing and zero terminal
    # data, so the solution must vanish identically (not just approximately)
    for m, _, co in (solved_classical, solved_piecewise):
        assert np.array_equal(co.q, np.zeros_like(co.q))
        assert np.array_equal(co.G, np.zeros_like(co.G))
        # p then integrates 2r - theta^2(t) exactly, segment by segment
        total = 0.0
        edges = sorted({0.0, m.T}
                       | {float(b) for b in m.rate.breakpoints}
                       | {float(b) for b in m.sigma.breakpoints})
        for lo, hi in zip(edges[:-1], edges[1:]):
            e = m.excess(lo)
            theta2 = float(e @ m.gamma_inv(lo) @ e)
            total += (2.0 * m.r(lo) - theta2) * (hi - lo)
        assert co.p[0] == pytest.approx(total, abs=1e-13)


def test_kron_route_matches_rk4_when_linear(solved_detfac, solved_piecewise):
    for m, fs, co in (solved_detfac, solved_piecewise):
        G_exact = solve_G_kron(m, fs)
        err = np.linalg.norm(co.G - G_exact, axis=(1, 2)).max()
        assert err < 1e-10
    m = presets.preset("scalar_coupled")
    with pytest.raises(Unsupported):
        solve_G_kron(m, solve_beta(m, 50))


def test_split_solvers_match_bundle(solved_scalar):
    m, fs, co = solved_scalar
    G = solve_G(m, fs)
    q = solve_q(m, fs, G)
    p = solve_p(m, fs, G, q)
    assert np.array_equal(G, co.G)
    assert np.array_equal(q, co.q)
    assert np.array_equal(p, co.p)


def test_transport_oracle_noiseless_factors(solved_detfac):
    # Lam = 0: y(t) solves y' = d + D y, and
    #   E[e^{2 xi_T}] = exp( int_0^T 2 r(t) - theta^2(t, y(t)) dt ),
    # which needs no knowledge of p, q, G.
    m, _, co = solved_detfac

    def rhs(t, state):
        y = state[:-1]
        e = m.a + m.A @ y - m.r(t)
        return np.append(m.d + m.D @ y, 2.0 * m.r(t) - e @ m.gamma_inv(t) @ e)

    sol = solve_ivp(rhs, (0.0, m.T), np.append(m.y0, 0.0),
                    rtol=1e-12, atol=1e-14, dense_output=False)
    oracle = float(np.exp(sol.y[-1, -1]))
    assert f_value(co, 0.0, m.y0) == pytest.approx(oracle, rel=1e-9)


def test_policy_tables_match_their_definition(solved_generic):
    m, fs, co = solved_generic
    k = 77
    t = co.grid.nodes[k]
    M = m.lam_sigma_T(t) + fs.beta[k] @ m.A.T
    assert np.allclose(co.V[k], m.excess(t) + M.T @ co.q[k], atol=1e-14)
    assert np.allclose(co.U[k], m.A + 2.0 * M.T @ co.G[k], atol=1e-13)


def test_f_value_checks_grid(solved_scalar):
    m, _, co = solved_scalar
    k = 31
    y = np.array([0.37])
    direct = np.exp(co.p[k] + co.q[k] @ y + y @ co.G[k] @ y)
    assert f_value(co, co.grid.nodes[k], y) == pytest.approx(float(direct), rel=0)
    with pytest.raises(GridMismatch):
        f_value(co, 0.1234567, y)


def test_residual_small_and_second_order_in_probe_step(solved_scalar):
    m, fs, co = solved_scalar
    rep = hjb_residual(m, fs, co, n_points=20, h_fd=2.5e-4, seed=4)
    assert rep.max_abs < 1e-4
    assert rep.residuals.shape == (20,)
    assert np.all(rep.ts > 0.0) and np.all(rep.ts < m.T)
    # the probe is a centered second-order stencil: quartering under halving
    coarse = hjb_residual(m, fs, co, n_points=20, h_fd=5e-4, seed=4)
    ratios = np.abs(coarse.residuals) / np.abs(rep.residuals)
    assert np.median(ratios) == pytest.approx(4.0, abs=1.0)

"""Shared fixtures: each market instance solved once per session at a
moderate grid (N=400), which is plenty for unit-level tolerances.

The acceptance module builds its own finer grids where a criterion pins
the step size.
"""

import pytest

from factormv import presets
from factormv.filterbank import solve_beta
from factormv.hjbsolve import solve_coefficients

UNIT_STEPS = 400

_accept_lines = []


def record_criterion(line):
    _accept_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _accept_lines:
        terminalreporter.section("acceptance criteria")
        for line in _accept_lines:
            terminalreporter.write_line(line)


def _solved(name, steps=UNIT_STEPS):
    model = presets.preset(name)
    fsol = solve_beta(model, steps)
    return model, fsol, solve_coefficients(model, fsol)


@pytest.fixture(scope="session")
def solved_classical():
    return _solved("classical")


@pytest.fixture(scope="session")
def solved_scalar():
    return _solved("scalar_coupled")


@pytest.fixture(scope="session")
def solved_generic():
    return _solved("generic_2x2")


@pytest.fixture(scope="session")
def solved_piecewise():
    return _solved("piecewise")


@pytest.fixture(scope="session")
def solved_detfac():
    return _solved("deterministic_factor")

from fractions import Fraction

import numpy as np
import pytest

from whframe import GaborSystem, GridSpec, LatticeSpec, build_table, make_window

REF_DELTA = Fraction(1, 1000)
REF_SPAN = 8
SEED = 42


def ref_grid(delta=REF_DELTA, span=REF_SPAN) -> GridSpec:
    return GridSpec.from_span(delta, -span, span)


class System:
    """Window, lattice, Gabor system and correlation table on one grid."""

    def __init__(self, kind, params, a, b, grid, scale=1.0, k_max=None):
        self.grid = grid
        self.lattice = LatticeSpec(a, b)
        g = make_window(kind, params, grid)
        self.g = g if scale == 1.0 else g * scale
        self.sys = GaborSystem.build(self.g, self.lattice)
        if k_max is None:
            sup = self.g.support()
            k_max = (sup[1] - sup[0]) // self.lattice.period_steps(grid)
        self.table = build_table(self.g, self.lattice, k_max)


@pytest.fixture(scope="session")
def box_system():
    return System("box", (0, 1), 1, 1, ref_grid())


@pytest.fixture(scope="session")
def box2_system():
    return System("box", (0, 1), 1, 1, ref_grid(), scale=2.0)


@pytest.fixture(scope="session")
def triangle_system():
    return System("triangle", (0, 2), 1, 1, ref_grid())


@pytest.fixture(scope="session")
def gauss_system():
    return System("gaussian", (1,), 1, Fraction(1, 2), ref_grid())


@pytest.fixture(scope="session")
def gauss_coarse():
    return System("gaussian", (1,), 1, Fraction(1, 2), ref_grid(Fraction(1, 100), 4))


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])

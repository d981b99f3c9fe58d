"""Correlation functions G_k, the Wiener amalgam norm and CC-condition quantities."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np

from .grid import GridSignal, GridSpec, Number, as_fraction

# sup G0 on the grid vs. on the 2x coarser sub-grid; bounded windows stay near 1
G0_GROWTH_LIMIT = 1.05


@dataclass(frozen=True)
class LatticeSpec:
    """Time-frequency lattice ``a Z x b Z``.  No condition on ``a * b`` is imposed."""

    a: Fraction
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", as_fraction(self.a))
        object.__setattr__(self, "b", as_fraction(self.b))
        if self.a <= 0 or self.b <= 0:
            raise ValueError("lattice parameters must be positive")

    def shift_steps(self, grid: GridSpec) -> int:
        """Samples per translation step ``a``."""
        return grid.steps(self.a)

    def period_steps(self, grid: GridSpec) -> int:
        """Samples per modulation period ``1/b``."""
        return grid.steps(1 / self.b)

    def check(self, grid: GridSpec) -> None:
        self.shift_steps(grid)
        self.period_steps(grid)

    @property
    def inv_b(self) -> float:
        return float(1 / self.b)


@dataclass(frozen=True, eq=False)
class PeriodicFunction:
    """One period of a grid function, ``values[r]`` at grid indices ``i = r mod len``."""

    values: np.ndarray
    grid: GridSpec
    out_of_range: bool = False

    @property
    def period_steps(self) -> int:
        return self.values.shape[0]

    @property
    def period(self) -> Fraction:
        return self.period_steps * self.grid.delta

    def at(self, indices) -> np.ndarray:
        return self.values[np.asarray(indices) % self.period_steps]

    def on_grid(self, grid: Optional[GridSpec] = None) -> np.ndarray:
        """Periodic extension sampled at every index of ``grid``."""
        grid = grid or self.grid
        return self.at(grid.indices)

    def t(self) -> np.ndarray:
        return np.arange(self.period_steps) * self.grid.step


def fold(values: np.ndarray, indices: np.ndarray, period: int) -> np.ndarray:
    """Sum of ``values`` over each residue class of ``indices`` mod ``period``."""
    r = indices % period
    if np.iscomplexobj(values):
        return (np.bincount(r, weights=values.real, minlength=period)
                + 1j * np.bincount(r, weights=values.imag, minlength=period))
    return np.bincount(r, weights=values, minlength=period)


def _lagged_product(g: GridSignal, lag: int, absolute: bool = False) -> np.ndarray:
    """``g(i) * conj(g(i - lag))`` at every grid index (zero where either factor is off-grid)."""
    x = g.samples
    n = x.shape[0]
    out = np.zeros(n, dtype=float if absolute else np.complex128)
    if abs(lag) >= n:
        return out
    if absolute:
        x = np.abs(x)
    if lag >= 0:
        out[lag:] = x[lag:] * (x[: n - lag] if absolute else np.conj(x[: n - lag]))
    else:
        m = -lag
        out[: n - m] = x[: n - m] * (x[m:] if absolute else np.conj(x[m:]))
    return out


def correlation_g(g: GridSignal, lattice: LatticeSpec, k: int) -> PeriodicFunction:
    """``G_k(t) = sum_n g(t - na) conj(g(t - na - k/b))`` over one period ``[0, a)``.

    When ``|k|/b`` exceeds the grid span no product term overlaps; the zero
    function comes back with ``out_of_range`` set.
    """
    grid = g.grid
    A = lattice.shift_steps(grid)
    P = lattice.period_steps(grid)
    lag = k * P
    if abs(lag) >= grid.size:
        return PeriodicFunction(np.zeros(A, dtype=np.complex128), grid, out_of_range=True)
    vals = fold(_lagged_product(g, lag), grid.indices, A)
    return PeriodicFunction(vals, grid)


def abs_correlation(g: GridSignal, lattice: LatticeSpec, k: int) -> np.ndarray:
    """``sum_n |g(t - na) g(t - na - k/b)|`` over one period; dominates ``|G_k|``."""
    grid = g.grid
    A = lattice.shift_steps(grid)
    lag = k * lattice.period_steps(grid)
    return fold(_lagged_product(g, lag, absolute=True), grid.indices, A)


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    lattice: LatticeSpec
    grid: GridSpec
    k_max: int
    gk: np.ndarray  # shape (2 k_max + 1, A); row k_max + k holds G_k
    tail_bound: float
    _extended: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def ks(self) -> range:
        return range(-self.k_max, self.k_max + 1)

    def row(self, k: int) -> np.ndarray:
        if abs(k) > self.k_max:
            raise IndexError(f"k={k} outside table range |k| <= {self.k_max}")
        return self.gk[self.k_max + k]

    def G(self, k: int) -> PeriodicFunction:
        return PeriodicFunction(self.row(k), self.grid)

    def on_grid(self, k: int) -> np.ndarray:
        """``G_k`` extended periodically to every grid index (exact index wrap)."""
        if k not in self._extended:
            ext = self.G(k).on_grid()
            ext.setflags(write=False)
            self._extended[k] = ext
        return self._extended[k]

    @property
    def g0(self) -> np.ndarray:
        return self.row(0).real

    @property
    def shift_steps(self) -> int:
        return self.gk.shape[1]

    @property
    def period_steps(self) -> int:
        return self.lattice.period_steps(self.grid)


def build_table(g: GridSignal, lattice: LatticeSpec, k_max: int) -> CorrelationTable:
    """All ``G_k`` with ``|k| <= k_max`` plus a bound on ``sup_t sum_{|k|>k_max} |G_k(t)|``.

    The tail bound adds up ``max_t sum_n |g(t-na) g(t-na-k/b)|`` over every
    remaining ``k`` whose lag still overlaps the truncated window, so it is
    exactly zero once the lags clear the window support.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    grid = g.grid
    lattice.check(grid)
    rows = [correlation_g(g, lattice, k).values for k in range(-k_max, k_max + 1)]
    gk = np.vstack(rows)
    gk[k_max] = gk[k_max].real  # G0 is real by construction; drop rounding residue

    tail = 0.0
    sup = g.support()
    if sup is not None:
        width = sup[1] - sup[0]
        P = lattice.period_steps(grid)
        k = k_max + 1
        while k * P <= width:
            tail += float(abs_correlation(g, lattice, k).max()) + float(abs_correlation(g, lattice, -k).max())
            k += 1
    return CorrelationTable(lattice, grid, k_max, gk, tail)


def amalgam_norm(g: GridSignal, a: Number) -> float:
    """``sum_n max |g|`` over the blocks ``[an, a(n+1))`` (grid maxima)."""
    A = g.grid.steps(a)
    block = g.grid.indices // A
    block -= block.min()
    sups = np.zeros(int(block.max()) + 1)
    np.maximum.at(sups, block, np.abs(g.samples))
    return math.fsum(sups)


@dataclass(frozen=True)
class CCReport:
    cc_sup: float
    g0_sup: float
    g0_inf: float
    epsilon: Optional[float]
    delta: float
    cc_bounded: bool
    g0_growth: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "cc_sup": self.cc_sup,
            "g0_sup": self.g0_sup,
            "g0_inf": self.g0_inf,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "cc_bounded": self.cc_bounded,
            "g0_growth": list(self.g0_growth),
        }


def g0_refinement_growth(table: CorrelationTable) -> List[float]:
    """Ratios ``sup G0 (grid 2^j delta) / sup G0 (grid 2^(j+1) delta)``.

    Coarser grids are the even-index sub-grids, whose G0 samples coincide
    with the fine ones, so no recomputation is needed.  Unbounded G0 shows
    up as ratios well above 1 (``sqrt 2`` for an inverse-square-root cusp).
    """
    g0 = np.abs(table.g0)
    A = table.shift_steps
    ratios = []
    step = 1
    while A % (2 * step) == 0 and len(ratios) < 2:
        fine = g0[::step].max()
        coarse = g0[:: 2 * step].max()
        ratios.append(float(fine / coarse) if coarse > 0 else math.inf)
        step *= 2
    return ratios


def g0_bounded(table: CorrelationTable) -> bool:
    return all(r <= G0_GROWTH_LIMIT for r in g0_refinement_growth(table))


def cc_report(table: CorrelationTable) -> CCReport:
    """Grid surrogates for the CC-condition and its epsilon-margin.

    ``epsilon`` is the largest margin with
    ``sum_{k != 0} |G_k| <= (1 - epsilon) G0`` at every grid point (the
    tail bound counted on the off-diagonal side).  It is only reported when
    G0 is positive everywhere and the refinement trend does not indicate an
    unbounded G0, since the margin says nothing without the bound.
    """
    absg = np.abs(table.gk)
    g0 = table.g0
    off = absg.sum(axis=0) - absg[table.k_max] + table.tail_bound
    cc_sup = float((absg.sum(axis=0)).max() + table.tail_bound)
    g0_sup, g0_inf = float(g0.max()), float(g0.min())
    growth = g0_refinement_growth(table)
    bounded = all(r <= G0_GROWTH_LIMIT for r in growth)
    eps = None
    if g0_inf > 0 and bounded:
        e = float(np.min(1.0 - off / g0))
        if e > 0:
            eps = min(e, 1.0)
    return CCReport(cc_sup, g0_sup, max(g0_inf, 0.0), eps, table.grid.step, bounded, growth)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def table_to_csv(table: CorrelationTable, fh: Optional[io.TextIOBase] = None) -> str:
    """CSV with columns ``k, t, re_Gk, im_Gk``, one period ``[0, a)`` per k."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "t", "re_Gk", "im_Gk"])
    t = np.arange(table.shift_steps) * table.grid.step
    for k in table.ks:
        row = table.row(k)
        for tj, v in zip(t, row):
            w.writerow([k, _fmt(tj), _fmt(v.real), _fmt(v.imag)])
    return buf.getvalue() if fh is None else ""

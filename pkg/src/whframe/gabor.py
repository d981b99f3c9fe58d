"""The WH system (g, a, b): coefficients, frame operator, frame bounds, inversion.

On a grid with ``1/b = P * delta`` the modulations ``E_mb`` depend only on
``m mod P``, so the band of ``P`` consecutive ``m`` centred on zero is the
complete (alias-free) set of distinct coefficients.  Every translate
``T_na g`` meeting the grid is included, which makes the discretized system
finite and its coefficient energy exact rather than truncated.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .correlation import LatticeSpec
from .grid import GridMismatchError, GridSignal, inner_product, modulate, norm, norm_sq, random_signal, translate
from .reporting import dumps

DENSE_MAX_SAMPLES = 4096
_CHUNK_ENTRIES = 2**22


class ConvergenceError(RuntimeError):
    """An iterative solve hit its iteration cap."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class GaborSystem:
    window: GridSignal
    lattice: LatticeSpec
    m_range: Tuple[int, int]
    n_range: Tuple[int, int]
    # the discretized system is finite, so nothing is cut off
    tail_certificate: float = 0.0

    @classmethod
    def build(cls, window: GridSignal, lattice: LatticeSpec) -> "GaborSystem":
        grid = window.grid
        A = lattice.shift_steps(grid)
        P = lattice.period_steps(grid)
        m_lo = -(P // 2)
        sup = window.support()
        if sup is None:
            n_range = (0, -1)
        else:
            # T_na g meets the grid iff [s0 + nA, s1 + nA] intersects [i_min, i_max]
            n_lo = -((sup[1] - grid.i_min) // A)
            n_hi = (grid.i_max - sup[0]) // A
            n_range = (n_lo, n_hi)
        return cls(window, lattice, (m_lo, m_lo + P - 1), n_range)

    @property
    def grid(self):
        return self.window.grid

    @property
    def A(self) -> int:
        return self.lattice.shift_steps(self.grid)

    @property
    def P(self) -> int:
        return self.lattice.period_steps(self.grid)

    @property
    def ms(self) -> np.ndarray:
        return np.arange(self.m_range[0], self.m_range[1] + 1)

    @property
    def ns(self) -> np.ndarray:
        return np.arange(self.n_range[0], self.n_range[1] + 1)

    def atom(self, m: int, n: int) -> GridSignal:
        """``E_mb T_na g`` restricted to the grid."""
        return modulate(translate(self.window, n * self.lattice.a), m * self.lattice.b)

    def _check_index(self, m: int, n: int) -> None:
        if not (self.m_range[0] <= m <= self.m_range[1] and self.n_range[0] <= n <= self.n_range[1]):
            raise IndexError(f"(m, n) = ({m}, {n}) outside {self.m_range} x {self.n_range}")


@dataclass(frozen=True, eq=False)
class CoefficientGrid:
    values: np.ndarray  # shape (len(m_range), len(n_range))
    m_range: Tuple[int, int]
    n_range: Tuple[int, int]

    def energy(self) -> float:
        a = np.abs(self.values)
        return math.fsum((a * a).ravel())

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "n", "re", "im"])
        for i, m in enumerate(range(self.m_range[0], self.m_range[1] + 1)):
            for j, n in enumerate(range(self.n_range[0], self.n_range[1] + 1)):
                v = self.values[i, j]
                w.writerow([m, n, format(v.real, ".17g"), format(v.imag, ".17g")])
        return buf.getvalue() if fh is None else ""


def coefficient(sys: GaborSystem, f: GridSignal, m: int, n: int) -> complex:
    """``<f, E_mb T_na g>``."""
    sys._check_index(m, n)
    return inner_product(f, sys.atom(m, n))


def _window_slice(sys: GaborSystem, n: int, lo: int, hi: int) -> np.ndarray:
    """Samples of ``T_na g`` at grid positions ``lo..hi`` (array offsets)."""
    g = sys.window.samples
    src_lo, src_hi = lo - n * sys.A, hi - n * sys.A
    out = np.zeros(hi - lo + 1, dtype=np.complex128)
    a, b = max(src_lo, 0), min(src_hi, g.shape[0] - 1)
    if a <= b:
        out[a - src_lo : b - src_lo + 1] = g[a : b + 1]
    return out


def coefficients(sys: GaborSystem, f: GridSignal) -> CoefficientGrid:
    """All ``<f, E_mb T_na g>`` by direct summation over the samples of ``f``.

    The exponential ``exp(-2 pi i m b t_i)`` is looked up from the table of
    P-th roots of unity at the exact integer phase ``m i mod P``.
    """
    if f.grid != sys.grid:
        raise GridMismatchError("signal and window live on different grids")
    grid = sys.grid
    P = sys.P
    ms, ns = sys.ms, sys.ns
    out = np.zeros((ms.size, ns.size), dtype=np.complex128)
    sup = f.support()
    if sup is None or ns.size == 0:
        return CoefficientGrid(out, sys.m_range, sys.n_range)
    lo, hi = sup[0] - grid.i_min, sup[1] - grid.i_min
    fs = f.samples[lo : hi + 1]
    H = np.empty((hi - lo + 1, ns.size), dtype=np.complex128)
    for j, n in enumerate(ns):
        H[:, j] = fs * np.conj(_window_slice(sys, int(n), lo, hi))
    roots = np.exp(-2j * np.pi * np.arange(P) / P)
    idx = grid.indices[lo : hi + 1]
    chunk = max(1, _CHUNK_ENTRIES // ms.size)
    for s in range(0, idx.size, chunk):
        ph = np.multiply.outer(ms, idx[s : s + chunk]) % P
        out += roots[ph] @ H[s : s + chunk]
    out *= grid.step
    return CoefficientGrid(out, sys.m_range, sys.n_range)


def coefficient_energy(sys: GaborSystem, f: GridSignal) -> float:
    """``sum_{m,n} |<f, E_mb T_na g>|^2`` over the full discretized system."""
    return coefficients(sys, f).energy()


def synthesize(sys: GaborSystem, coef: CoefficientGrid) -> GridSignal:
    """``sum_{m,n} c_mn E_mb T_na g`` on the grid.

    ``sum_m c_mn exp(2 pi i m b t_i)`` depends on ``i mod P`` only; it is
    evaluated once per residue and then multiplied onto each translate.
    """
    grid = sys.grid
    P = sys.P
    ms, ns = sys.ms, sys.ns
    out = np.zeros(grid.size, dtype=np.complex128)
    if ns.size == 0:
        return GridSignal(grid, out)
    roots = np.exp(2j * np.pi * np.arange(P) / P)
    res = np.arange(P)
    per = np.zeros((P, ns.size), dtype=np.complex128)
    chunk = max(1, _CHUNK_ENTRIES // ms.size)
    for s in range(0, P, chunk):
        ph = np.multiply.outer(res[s : s + chunk], ms) % P
        per[s : s + chunk] = roots[ph] @ coef.values
    rmod = grid.indices % P
    for j, n in enumerate(ns):
        gn = _window_slice(sys, int(n), 0, grid.size - 1)
        nz = np.flatnonzero(gn)
        if nz.size:
            out[nz] += gn[nz] * per[rmod[nz], j]
    return GridSignal(grid, out)


def frame_operator_apply(sys: GaborSystem, f: GridSignal) -> GridSignal:
    """``S f = sum_{m,n} <f, E_mb T_na g> E_mb T_na g`` (analysis then synthesis)."""
    return synthesize(sys, coefficients(sys, f))


def frame_operator_matrix(sys: GaborSystem) -> np.ndarray:
    """Dense matrix of S, assembled as ``delta * V V^H`` from the atoms themselves."""
    grid = sys.grid
    if grid.size > DENSE_MAX_SAMPLES:
        raise ValueError(f"dense frame operator limited to {DENSE_MAX_SAMPLES} samples, grid has {grid.size}")
    P = sys.P
    roots = np.exp(2j * np.pi * np.arange(P) / P)
    ph = np.multiply.outer(grid.indices, sys.ms) % P
    E = roots[ph]  # (N, P): E[i, m] = exp(2 pi i m b t_i)
    S = np.zeros((grid.size, grid.size), dtype=np.complex128)
    for n in sys.ns:
        V = _window_slice(sys, int(n), 0, grid.size - 1)[:, None] * E
        S += V @ V.conj().T
    S *= grid.step
    return S


@dataclass(frozen=True)
class FrameBoundsReport:
    A_est: float
    B_est: float
    probe_count: int
    method: str
    seed: Optional[int] = None

    def to_dict(self):
        return {"a_est": self.A_est, "b_est": self.B_est, "method": self.method,
                "probe_count": self.probe_count, "seed": self.seed}

    def to_json(self) -> str:
        return dumps(self.to_dict())


def _rayleigh(op, v: GridSignal) -> float:
    return inner_product(op(v), v).real / norm_sq(v)


def _power_extreme(S, v: GridSignal, best: float, iters: int, shift: Optional[float]) -> float:
    """Power iteration on S (``shift`` None, tracks the max Rayleigh quotient)
    or on ``shift I - S`` (tracks the min).  Stops early at an eigenvector."""
    v = v / norm(v)
    for _ in range(iters):
        Sv = S(v)
        q = inner_product(Sv, v).real
        best = max(best, q) if shift is None else min(best, q)
        if norm(Sv - v * q) <= 1e-10 * max(abs(q), 1e-300):
            break
        w = Sv if shift is None else v * shift - Sv
        nw = norm(w)
        if nw == 0:
            break
        v = w / nw
    return best


def frame_bounds_estimate(sys: GaborSystem, probes: int = 8, seed: int = 0,
                          method: str = "rayleigh_extremes", iters: int = 200,
                          operator: Optional[Callable[[GridSignal], GridSignal]] = None) -> FrameBoundsReport:
    """Estimate the frame bounds of the discretized system.

    ``rayleigh_extremes`` takes the extreme Rayleigh quotients of seeded random
    probes and then runs power iteration on S (for B) and on ``B_est I - S``
    (for A).  Rayleigh quotients always lie in ``[A, B]``, so ``A_est`` is an
    upper estimate of the true A and ``B_est`` a lower estimate of the true B.
    ``dense_eigen`` returns the exact extreme eigenvalues of the materialized
    operator and is limited to small grids.
    """
    if probes < 1:
        raise ValueError("need at least one probe")
    if method == "dense_eigen":
        ev = np.linalg.eigvalsh(frame_operator_matrix(sys))
        return FrameBoundsReport(max(float(ev[0]), 0.0), float(ev[-1]), probes, method, seed)
    if method != "rayleigh_extremes":
        raise ValueError(f"unknown method {method!r}")

    S = operator or (lambda x: frame_operator_apply(sys, x))
    rng = np.random.default_rng(seed)
    grid = sys.grid
    vs, qs = [], []
    while len(vs) < probes:
        v = random_signal(grid, rng, (grid.t_min, grid.t_max))
        if norm_sq(v) == 0:
            continue
        vs.append(v)
        qs.append(_rayleigh(S, v))

    B = _power_extreme(S, vs[int(np.argmax(qs))], max(qs), iters, shift=None)
    A = _power_extreme(S, vs[int(np.argmin(qs))], min(qs), iters, shift=B)
    return FrameBoundsReport(max(A, 0.0), B, probes, method, seed)


def inverse_frame_apply(sys: GaborSystem, f: GridSignal, tol: float = 1e-8, max_iter: int = 500,
                        bounds: Optional[FrameBoundsReport] = None,
                        operator: Optional[Callable[[GridSignal], GridSignal]] = None) -> GridSignal:
    """Solve ``S h = f`` by conjugate gradients (S is self-adjoint and positive).

    Starts from ``f / B_est`` and stops once ``||S h - f|| <= tol ||f||``.
    """
    S = operator or (lambda x: frame_operator_apply(sys, x))
    if bounds is None:
        bounds = frame_bounds_estimate(sys, probes=4, seed=0, iters=20, operator=S)
    if not bounds.A_est > 0:
        raise ValueError("frame operator failed the positivity check (A_est = 0)")
    fn = norm(f)
    if fn == 0:
        return GridSignal.zeros(f.grid)
    h = f / bounds.B_est
    r = f - S(h)
    p = r
    rr = norm_sq(r)
    for _ in range(max_iter):
        if math.sqrt(rr) <= tol * fn:
            return h
        Sp = S(p)
        alpha = rr / inner_product(Sp, p).real
        h = h + alpha * p
        r = r - alpha * Sp
        rr_new = norm_sq(r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    res = math.sqrt(rr) / fn
    if res <= tol:
        return h
    raise ConvergenceError("conjugate gradients did not converge", res)

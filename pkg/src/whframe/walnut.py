"""Walnut partial sums, the right-hand side of the WH-frame identity, and
convergence diagnostics for its k-series.

All partial sums carry the factor ``1/b`` so that the symmetric sums tend to
the frame operator itself:

    S_M f = (1/b) * sum_{k in M} (T_{k/b} f) * G_k
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .correlation import CorrelationTable, LatticeSpec, PeriodicFunction, fold, g0_bounded, g0_refinement_growth
from .grid import GridMismatchError, GridSignal, inner_product, norm, norm_sq, shift_samples

# verdict thresholds, relative to ||f||
CONVERGED_DISTANCE = 1e-5
SUBSET_SLACK = 10.0
# distances below this (relative to ||f||) are rounding noise
ROUNDOFF_FLOOR = 1e-12


class CertificateError(ValueError):
    """The correlation table cannot certify the requested remainder."""


@dataclass(frozen=True)
class PartialSumSpec:
    """Which k enter a Walnut partial sum.

    ``symmetric(K)`` is ``-K..K``, ``rectangular(K, L)`` is ``-L..K`` and
    ``subset(M)`` an explicit finite set (order kept, duplicates rejected).
    """

    mode: str
    K: int = 0
    L: int = 0
    M: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in ("symmetric", "rectangular", "subset"):
            raise ValueError(f"unknown partial-sum mode {self.mode!r}")
        if self.K < 0 or self.L < 0:
            raise ValueError("K and L must be >= 0")
        if self.mode == "subset":
            m = tuple(int(k) for k in self.M)
            if len(set(m)) != len(m):
                raise ValueError("duplicate indices in subset")
            object.__setattr__(self, "M", m)

    @classmethod
    def symmetric(cls, K: int) -> "PartialSumSpec":
        return cls("symmetric", K=K, L=K)

    @classmethod
    def rectangular(cls, K: int, L: int) -> "PartialSumSpec":
        return cls("rectangular", K=K, L=L)

    @classmethod
    def subset(cls, M: Iterable[int]) -> "PartialSumSpec":
        return cls("subset", M=tuple(M))

    def indices(self) -> Tuple[int, ...]:
        if self.mode == "subset":
            return self.M
        return tuple(range(-self.L, self.K + 1))

    def label(self) -> str:
        if self.mode == "symmetric":
            return f"symmetric({self.K})"
        if self.mode == "rectangular":
            return f"rectangular({self.K},{self.L})"
        return "subset(" + ",".join(str(k) for k in self.M) + ")"

    def __contains__(self, k: int) -> bool:
        return k in self.indices()


def _check_grid(table: CorrelationTable, f: GridSignal) -> None:
    if f.grid != table.grid:
        raise GridMismatchError("signal and correlation table live on different grids")


def _g_on_grid(table: CorrelationTable, k: int) -> Optional[np.ndarray]:
    """``G_k`` on the grid, or None when it is certified to vanish."""
    if abs(k) <= table.k_max:
        # identically zero rows contribute nothing
        return table.on_grid(k) if table.row(k).any() else None
    if table.tail_bound == 0.0:
        return None
    raise CertificateError(
        f"k={k} lies outside the table (k_max={table.k_max}) and the tail bound "
        f"{table.tail_bound:.3e} does not certify it away; rebuild with a larger k_max"
    )


def walnut_term(table: CorrelationTable, f: GridSignal, k: int) -> np.ndarray:
    """Samples of ``(1/b) (T_{k/b} f) G_k``."""
    _check_grid(table, f)
    G = _g_on_grid(table, k)
    if G is None:
        return np.zeros(f.grid.size, dtype=np.complex128)
    return table.lattice.inv_b * shift_samples(f.samples, k * table.period_steps) * G


def walnut_partial_apply(table: CorrelationTable, f: GridSignal, spec: PartialSumSpec) -> GridSignal:
    """``S_M f`` for the index set of ``spec``, summed in index order."""
    _check_grid(table, f)
    out = np.zeros(f.grid.size, dtype=np.complex128)
    for k in spec.indices():
        out += walnut_term(table, f, k)
    return GridSignal(f.grid, out)


def walnut_adjoint_apply(table: CorrelationTable, f: GridSignal, spec: PartialSumSpec) -> GridSignal:
    """Adjoint of :func:`walnut_partial_apply`: ``(1/b) sum_k T_{-k/b}(conj(G_k) f)``."""
    _check_grid(table, f)
    out = np.zeros(f.grid.size, dtype=np.complex128)
    P = table.period_steps
    for k in spec.indices():
        G = _g_on_grid(table, k)
        if G is None:
            continue
        out += shift_samples(np.conj(G) * f.samples, -k * P)
    return GridSignal(f.grid, table.lattice.inv_b * out)


def walnut_full_apply(table: CorrelationTable, f: GridSignal, tol: float = 1e-6) -> GridSignal:
    """Walnut representation of ``S f``: the ``symmetric(k_max)`` sum, provided the
    neglected terms are certified below ``tol * ||f||``."""
    remainder = table.lattice.inv_b * table.tail_bound
    if remainder > tol:
        raise CertificateError(
            f"remainder bound {remainder:.3e} * ||f|| exceeds tol={tol:.1e}; increase k_max"
        )
    return walnut_partial_apply(table, f, PartialSumSpec.symmetric(table.k_max))


@dataclass(frozen=True)
class IdentityRHS:
    f1: float
    f2: float
    per_k_terms: List[Tuple[int, complex]]
    total: float
    convergence_mode_used: str
    f2_two_sided: complex = 0j

    def term(self, k: int) -> complex:
        for kk, v in self.per_k_terms:
            if kk == k:
                return v
        raise KeyError(k)

    def pairing_residual(self) -> float:
        """``max_k |term(-k) - conj(term(k))|``."""
        d = dict(self.per_k_terms)
        res = 0.0
        for k, v in d.items():
            if k > 0 and -k in d:
                res = max(res, abs(d[-k] - np.conj(v)))
        return res

    def to_dict(self) -> Dict:
        return {
            "f1": self.f1,
            "f2": self.f2,
            "total": self.total,
            "convergence_mode_used": self.convergence_mode_used,
            "per_k_terms": [[k, v.real, v.imag] for k, v in self.per_k_terms],
        }

    def terms_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "re_term", "im_term"])
        for k, v in self.per_k_terms:
            w.writerow([k, format(v.real, ".17g"), format(v.imag, ".17g")])
        return buf.getvalue()


def identity_term(table: CorrelationTable, f: GridSignal, k: int) -> complex:
    """``(1/b) int conj(f(t)) f(t - k/b) G_k(t) dt``."""
    return inner_product(GridSignal(f.grid, walnut_term(table, f, k)), f)


def identity_rhs(table: CorrelationTable, f: GridSignal,
                 schedule: Optional[PartialSumSpec] = None) -> IdentityRHS:
    """Right-hand side ``F1(f) + F2(f)`` of the WH-frame identity.

    ``F2`` uses the ``2 Re`` form over ``k >= 1`` when the schedule is
    symmetric about zero and the plain two-sided sum otherwise.
    """
    _check_grid(table, f)
    schedule = schedule or PartialSumSpec.symmetric(table.k_max)
    ks = schedule.indices()
    terms = [(k, identity_term(table, f, k)) for k in ks]
    d = dict(terms)
    f1 = d[0].real if 0 in d else 0.0
    two_sided = complex(math.fsum(v.real for k, v in terms if k != 0),
                        math.fsum(v.imag for k, v in terms if k != 0))
    if all(-k in d for k in d):
        f2 = math.fsum(2.0 * v.real for k, v in terms if k >= 1)
    else:
        f2 = two_sided.real
    return IdentityRHS(f1, f2, terms, f1 + f2, schedule.label(), two_sided)


def _power_norm(apply: Callable, adjoint: Callable, v: GridSignal, iters: int) -> Tuple[float, GridSignal]:
    """Largest ``||A v|| / ||v||`` seen along power iteration on ``A^* A``."""
    nv = norm(v)
    if nv == 0:
        return 0.0, v
    v = v / nv
    best, best_v = 0.0, v
    for _ in range(iters):
        w = apply(v)
        nw = norm(w)
        if nw > best:
            best, best_v = nw, v
        if nw == 0:
            break
        u = adjoint(w)
        nu = norm(u)
        if nu == 0:
            break
        v = u / nu
    return best, best_v


def _probe(grid, seed: int) -> GridSignal:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
    return GridSignal(grid, x)


def partial_norm_estimate(table: CorrelationTable, spec: PartialSumSpec, iters: int = 100,
                          seed: int = 0, start: Optional[GridSignal] = None) -> float:
    """Power-iteration estimate of ``||S_M||`` (never above the true norm).

    The iteration runs on ``S_M^* S_M`` with the adjoint applied directly;
    the returned value is the largest ``||S_M v|| / ||v||`` encountered.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    v = start if start is not None else _probe(table.grid, seed)
    est, _ = _power_norm(lambda x: walnut_partial_apply(table, x, spec),
                         lambda x: walnut_adjoint_apply(table, x, spec), v, iters)
    return est


@dataclass
class ConvergenceReport:
    symmetric: List[Dict] = field(default_factory=list)
    rectangular: List[Dict] = field(default_factory=list)
    subsets: List[Dict] = field(default_factory=list)
    verdicts: Dict[str, bool] = field(default_factory=dict)
    evidence: Dict[str, object] = field(default_factory=dict)
    seed: int = 0

    @property
    def trace(self) -> List[Dict]:
        return self.symmetric + self.rectangular + self.subsets

    def to_dict(self) -> Dict:
        return {
            "symmetric": self.symmetric,
            "rectangular": self.rectangular,
            "subsets": self.subsets,
            "verdicts": self.verdicts,
            "evidence": self.evidence,
            "seed": self.seed,
        }

    def symmetric_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["K", "quadratic_form", "distance", "op_norm_est"])
        for row in self.symmetric:
            w.writerow([row["K"], format(row["quadratic_form"], ".17g"),
                        format(row["distance"], ".17g"), format(row["op_norm_est"], ".17g")])
        return buf.getvalue()


def _core(M: Iterable[int]) -> int:
    """Largest K with ``-K..K`` inside M (-1 when 0 is missing)."""
    s = set(M)
    K = -1
    while K + 1 in s and -(K + 1) in s:
        K += 1
    return K


def convergence_diagnostics(table: CorrelationTable, f: GridSignal, max_k: Optional[int] = None,
                            subset_trials: int = 200, seed: int = 0, exhaustive_window: int = 4,
                            norm_iters: int = 50) -> ConvergenceReport:
    """Measure how the Walnut series for ``f`` converges.

    * symmetric: ``||S_K f - S f||`` for ``K = 0..max_k`` with quadratic forms
      and operator-norm estimates;
    * rectangular: ``||S_{K,L} f - S f||`` over the ``(K, L)`` grid;
    * unconditional: every subset of ``|k| <= exhaustive_window`` plus seeded
      random subsets and random enumeration prefixes of ``|k| <= max_k``.  A
      subset M whose largest symmetric core is ``-K..K`` must satisfy
      ``||S_M f - S f|| <= 10 * ||S_K f - S f||`` (up to rounding noise).

    ``S f`` is the ``symmetric(k_max)`` sum of the table.  Every verdict also
    requires the G0 refinement trend to look bounded.
    """
    _check_grid(table, f)
    k_max = table.k_max
    max_k = k_max if max_k is None else max_k
    if max_k > k_max:
        raise ValueError(f"max_k={max_k} exceeds table k_max={k_max}")
    rng = np.random.default_rng(seed)
    fn = norm(f)
    floor = ROUNDOFF_FLOOR * max(fn, 1e-300)
    terms = {k: walnut_term(table, f, k) for k in table.ks}
    full = np.zeros(f.grid.size, dtype=np.complex128)
    for k in table.ks:
        full += terms[k]
    step = f.grid.step

    def dist_of(ks: Iterable[int]) -> float:
        acc = np.zeros_like(full)
        for k in sorted(ks):
            acc += terms[k]
        d = acc - full
        return math.sqrt(step * math.fsum((d.real ** 2 + d.imag ** 2)))

    report = ConvergenceReport(seed=seed)

    sym_d = []
    probe = _probe(f.grid, seed)
    for K in range(max_k + 1):
        spec = PartialSumSpec.symmetric(K)
        SKf = walnut_partial_apply(table, f, spec)
        d = dist_of(range(-K, K + 1))
        sym_d.append(d)
        report.symmetric.append({
            "K": K,
            "spec": spec.label(),
            "quadratic_form": inner_product(SKf, f).real,
            "distance": d,
            "op_norm_est": partial_norm_estimate(table, spec, norm_iters, start=probe),
            "nested_in_previous": K > 0,
        })
    d_core = {-1: norm(GridSignal(f.grid, full))}
    d_core.update({K: sym_d[K] for K in range(max_k + 1)})
    for K in range(max_k + 1, k_max + 1):
        d_core[K] = dist_of(range(-K, K + 1))

    rect = {}
    for K in range(max_k + 1):
        for L in range(max_k + 1):
            d = dist_of(range(-L, K + 1))
            rect[(K, L)] = d
            report.rectangular.append({"K": K, "L": L, "spec": PartialSumSpec.rectangular(K, L).label(),
                                       "distance": d})

    def subset_row(M, origin):
        M = tuple(M)
        K = _core(M)
        dev = dist_of(M)
        allowed = SUBSET_SLACK * d_core[K] + floor
        return {"M": list(M), "origin": origin, "core": K, "deviation": dev,
                "allowed": allowed, "ok": dev <= allowed}

    W = min(exhaustive_window, max_k)
    window = list(range(-W, W + 1))
    for r in range(len(window) + 1):
        for M in itertools.combinations(window, r):
            report.subsets.append(subset_row(M, "exhaustive"))
    full_window = np.arange(-max_k, max_k + 1)
    for trial in range(subset_trials):
        if trial % 2 == 0:
            mask = rng.random(full_window.size) < 0.5
            M = [int(k) for k in full_window[mask]]
            report.subsets.append(subset_row(M, "random_subset"))
        else:
            order = rng.permutation(full_window)
            cut = int(rng.integers(1, full_window.size + 1))
            report.subsets.append(subset_row([int(k) for k in order[:cut]], "enumeration_prefix"))

    bounded = g0_bounded(table)
    half = (max_k + 1) // 2
    tail = sym_d[half:]
    sym_monotone = all(tail[i + 1] <= tail[i] + floor for i in range(len(tail) - 1))
    sym_ok = sym_monotone and sym_d[-1] <= CONVERGED_DISTANCE * fn + floor
    shell = max((d for (K, L), d in rect.items() if min(K, L) >= half), default=0.0)
    rect_ok = shell <= CONVERGED_DISTANCE * fn + floor
    worst = max((row["deviation"] - row["allowed"] for row in report.subsets), default=-1.0)
    uncond_ok = all(row["ok"] for row in report.subsets)

    report.verdicts = {
        "symmetric_converges": bool(sym_ok and bounded),
        "rectangular_converges": bool(rect_ok and bounded),
        "unconditional_converges": bool(uncond_ok and bounded),
    }
    report.evidence = {
        "norm_f": fn,
        "g0_bounded": bounded,
        "g0_growth": g0_refinement_growth(table),
        "symmetric_rule": f"distance non-increasing for K >= {half} and final distance <= "
                          f"{CONVERGED_DISTANCE:g} ||f||",
        "symmetric_final_distance": sym_d[-1],
        "rectangular_rule": f"max distance over min(K,L) >= {half} <= {CONVERGED_DISTANCE:g} ||f||",
        "rectangular_shell_max": shell,
        "unconditional_rule": f"subset deviation <= {SUBSET_SLACK:g} x symmetric distance at its core",
        "unconditional_worst_excess": worst,
        "subset_count": len(report.subsets),
        "partial_norm_sup": max(row["op_norm_est"] for row in report.symmetric),
    }
    return report


def polarization_combination(op: Callable[[GridSignal], GridSignal], x: GridSignal, y: GridSignal) -> complex:
    """``<T(x+y),x+y> - <T(x-y),x-y> + i<T(x+iy),x+iy> - i<T(x-iy),x-iy>``."""
    def q(v):
        return inner_product(op(v), v)

    return q(x + y) - q(x - y) + 1j * q(x + 1j * y) - 1j * q(x - 1j * y)


def polarization_check(op: Callable[[GridSignal], GridSignal], x: GridSignal, y: GridSignal) -> float:
    """``|4 <T x, y> - polarization combination|``; zero for any linear T."""
    return abs(4 * inner_product(op(x), y) - polarization_combination(op, x, y))


@dataclass(frozen=True)
class NormBoundCheck:
    op_norm_est: float
    max_quadratic: float
    holds: bool


def norm_bound_check(op: Callable[[GridSignal], GridSignal], grid, probes: int = 100, seed: int = 0,
                     iters: int = 50, adjoint: Optional[Callable] = None) -> NormBoundCheck:
    """Check ``||T|| <= 2 sup_{||f|| <= 1} |<T f, f>|`` on probes.

    The norm is estimated by power iteration (on ``T^* T`` when an adjoint is
    given, on ``T`` otherwise); the probe set is ``probes`` seeded random
    vectors together with the final power-iteration vector.
    """
    rng = np.random.default_rng(seed)
    vs = []
    for _ in range(probes):
        vs.append(GridSignal(grid, rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)))
    start = vs[0]
    if adjoint is not None:
        est, v = _power_norm(op, adjoint, start, iters)
    else:
        v = start / norm(start)
        est = 0.0
        for _ in range(iters):
            w = op(v)
            nw = norm(w)
            est = max(est, nw)
            if nw == 0:
                break
            v = w / nw
    vs.append(v)
    qmax = max(abs(inner_product(op(u), u)) / norm_sq(u) for u in vs if norm_sq(u) > 0)
    return NormBoundCheck(est, qmax, est <= 2 * qmax * (1 + 1e-12))


def periodized_product(f: GridSignal, g: GridSignal, lattice: LatticeSpec, n: int) -> PeriodicFunction:
    """``H_n(t) = sum_k f(t - k/b) conj(g(t - na - k/b))`` over one period ``[0, 1/b)``."""
    if f.grid != g.grid:
        raise GridMismatchError("f and g live on different grids")
    grid = f.grid
    A = lattice.shift_steps(grid)
    P = lattice.period_steps(grid)
    prod = f.samples * np.conj(shift_samples(g.samples, n * A))
    return PeriodicFunction(fold(prod, grid.indices, P), grid)


def plancherel_rhs(H: PeriodicFunction, lattice: LatticeSpec) -> float:
    """``(1/b) int_0^{1/b} |H_n|^2``."""
    a = np.abs(H.values)
    return lattice.inv_b * H.grid.step * math.fsum(a * a)

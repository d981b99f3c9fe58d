"""Scenario engine: WH-frame identity checks per hypothesis regime and
divergence probes for the failure regimes.

Reports only ever describe the instance that was computed ("consistent with
... at this grid"), never the abstract statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .correlation import LatticeSpec, build_table, cc_report, correlation_g
from .gabor import GaborSystem, coefficient_energy
from .grid import GridSignal, GridSpec, as_fraction, make_window, norm_sq
from .walnut import ConvergenceReport, IdentityRHS, convergence_diagnostics, identity_rhs

HYPOTHESIS_CLASSES = ("bcf", "cf", "cc", "failure_bcf", "failure_cf")
EXPECTED = ("identity_holds", "diverges")
GAP_FLOOR = 1e-12
GROWTH_TOLERANCE = 0.2

DEFAULT_BCF_LEVELS = (4, 8, 16, 32)
DEFAULT_CF_LEVELS = tuple(Fraction(1, 2**j) for j in range(3, 9))


@dataclass(frozen=True)
class WindowSpec:
    """A window or signal recipe: ``scale * kind(params)``."""

    kind: str
    params: Tuple = ()
    scale: float = 1.0

    def sample(self, grid: GridSpec) -> GridSignal:
        w = make_window(self.kind, self.params, grid, require_l2=False)
        return w if self.scale == 1.0 else w * self.scale

    @property
    def bounded(self) -> bool:
        return self.kind != "power_cusp" or float(self.params[0]) <= 0

    @property
    def compact(self) -> bool:
        if self.kind == "box":
            return all(math.isfinite(float(p)) for p in self.params)
        return self.kind in ("triangle", "power_cusp", "user_samples")

    @property
    def square_integrable(self) -> bool:
        if self.kind == "power_cusp":
            return float(self.params[0]) < 0.5
        if self.kind == "box":
            return self.compact
        return True

    @property
    def amalgam(self) -> bool:
        """Locally bounded with summable block sups."""
        return self.kind in ("gaussian", "triangle") or (self.kind == "box" and self.compact)

    def label(self) -> str:
        body = f"{self.kind}:" + ",".join(str(p) for p in self.params)
        return body if self.scale == 1.0 else f"{self.scale:g}*{body}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "params": [str(p) if isinstance(p, Fraction) else p for p in self.params],
                "scale": self.scale}


@dataclass(frozen=True)
class Scenario:
    name: str
    window: WindowSpec
    lattice: LatticeSpec
    signal: WindowSpec
    hypothesis_class: str
    expected: str
    delta: Fraction = Fraction(1, 1000)
    span: float = 8.0
    k_max: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "delta", as_fraction(self.delta))
        if self.hypothesis_class not in HYPOTHESIS_CLASSES:
            raise ValueError(f"unknown hypothesis class {self.hypothesis_class!r}")
        if self.expected not in EXPECTED:
            raise ValueError(f"unknown expectation {self.expected!r}")
        w, s, c = self.window, self.signal, self.hypothesis_class
        problems = []
        if c == "bcf":
            if not (s.bounded and s.compact):
                problems.append("bcf needs a bounded, compactly supported signal")
            if not w.square_integrable:
                problems.append("bcf needs a square-integrable window")
        elif c == "cf":
            if not s.compact:
                problems.append("cf needs a compactly supported signal")
            if not (w.bounded and w.compact or w.amalgam):
                problems.append("cf needs a window with bounded G0")
        elif c == "cc":
            if not w.amalgam:
                problems.append("cc needs a window in the amalgam class (gaussian, box, triangle)")
        elif c == "failure_bcf":
            if w.square_integrable:
                problems.append("failure_bcf needs a window that is not square integrable")
        elif c == "failure_cf":
            if w.bounded:
                problems.append("failure_cf needs a window with unbounded G0")
        if c.startswith("failure") != (self.expected == "diverges"):
            problems.append(f"class {c} is inconsistent with expectation {self.expected}")
        if problems:
            raise ValueError(f"scenario {self.name!r}: " + "; ".join(problems))

    def grid(self, delta: Optional[Fraction] = None, span: Optional[float] = None) -> GridSpec:
        d = self.delta if delta is None else as_fraction(delta)
        s = self.span if span is None else span
        return GridSpec.from_span(d, -as_fraction(s), as_fraction(s))

    def refined(self, factor: int = 2) -> "Scenario":
        return replace(self, delta=self.delta / factor)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "window": self.window.to_dict(),
            "lattice": {"a": str(self.lattice.a), "b": str(self.lattice.b)},
            "signal": self.signal.to_dict(),
            "hypothesis_class": self.hypothesis_class,
            "expected": self.expected,
            "delta": str(self.delta),
            "span": self.span,
            "k_max": self.k_max,
        }


@dataclass
class VerdictReport:
    name: str
    lhs: Optional[float]
    rhs: Optional[IdentityRHS]
    relative_gap: Optional[float]
    convergence: Optional[ConvergenceReport]
    verdict: str
    refinement_trace: Optional[List[Tuple[float, float]]] = None
    notes: List[str] = field(default_factory=list)
    details: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "lhs": self.lhs,
            "rhs": None if self.rhs is None else self.rhs.to_dict(),
            "relative_gap": self.relative_gap,
            "convergence": None if self.convergence is None else self.convergence.to_dict(),
            "refinement_trace": self.refinement_trace,
            "notes": self.notes,
            "details": self.details,
        }


def relative_gap(lhs: float, rhs_total: float) -> float:
    return abs(lhs - rhs_total) / max(lhs, GAP_FLOOR)


def auto_k_max(g: GridSignal, lattice: LatticeSpec) -> int:
    """Smallest k_max beyond which every lag clears the window support."""
    sup = g.support()
    if sup is None:
        return 0
    P = lattice.period_steps(g.grid)
    return (sup[1] - sup[0]) // P


def verify_identity(scenario: Scenario, tol: float = 1e-6, seed: int = 0, subset_trials: int = 200,
                    max_k: int = 8) -> VerdictReport:
    """Compare the coefficient energy with the Walnut right-hand side.

    bcf/cf regimes additionally require the right-hand side to be a finite
    sum (all terms with ``|k|/b`` beyond the signal's support vanish); the cc
    regime requires the unconditional-convergence verdict.
    """
    if scenario.hypothesis_class.startswith("failure"):
        return divergence_probe(scenario)
    grid = scenario.grid()
    scenario.lattice.check(grid)
    g = scenario.window.sample(grid)
    f = scenario.signal.sample(grid)
    sys = GaborSystem.build(g, scenario.lattice)
    lhs = coefficient_energy(sys, f)
    k_max = scenario.k_max if scenario.k_max is not None else auto_k_max(g, scenario.lattice)
    table = build_table(g, scenario.lattice, k_max)
    rhs = identity_rhs(table, f)
    conv = convergence_diagnostics(table, f, max_k=min(max_k, k_max), subset_trials=subset_trials, seed=seed)
    gap = relative_gap(lhs, rhs.total)

    cls = scenario.hypothesis_class
    details = {"k_max": k_max, "tail_bound": table.tail_bound, "delta": grid.step,
               "pairing_residual": rhs.pairing_residual(), "cc": cc_report(table).to_dict()}
    if cls in ("bcf", "cf"):
        sup = f.support()
        reach = 0 if sup is None else (sup[1] - sup[0]) // table.period_steps
        finite = all(v == 0 for k, v in rhs.per_k_terms if abs(k) > reach)
        details["nonzero_k_reach"] = reach
        details["finite_sum"] = finite
        flags_ok = finite
    else:
        flags_ok = conv.verdicts["unconditional_converges"]
    verdict = "pass" if gap <= tol and flags_ok else "fail"
    regime = {
        "bcf": "bounded compactly supported f with a square-integrable window",
        "cf": "compactly supported f with bounded G0",
        "cc": "a window satisfying the CC-condition (unconditional convergence)",
    }[cls]
    notes = [f"{'consistent' if verdict == 'pass' else 'inconsistent'} with the identity for {regime} "
             f"at delta={grid.step:g}, span={scenario.span:g}, k_max={k_max}"]
    return VerdictReport(scenario.name, lhs, rhs, gap, conv, verdict, None, notes, details)


def _window_truncation_level(scenario: Scenario, T: float) -> Tuple[float, float]:
    """F1 for the window cut to ``[-T, T]`` together with the linear-law prediction."""
    span = max(float(T) + 2.0, scenario.span)
    grid = scenario.grid(span=span)
    g = scenario.window.sample(grid)
    t = grid.t
    g = g * ((t >= -T) & (t <= T))
    f = scenario.signal.sample(grid)
    G0 = correlation_g(g, scenario.lattice, 0).on_grid().real
    f1 = scenario.lattice.inv_b * grid.step * math.fsum(np.abs(f.samples) ** 2 * G0)
    a = float(scenario.lattice.a)
    law = scenario.lattice.inv_b * (2 * T / a + 1) * norm_sq(f)
    return f1, law


def _cusp_exponent(spec: WindowSpec) -> float:
    return float(spec.params[0]) if spec.kind == "power_cusp" else 0.0


def _signal_truncation_level(scenario: Scenario, grid: GridSpec, g: GridSignal, G0: np.ndarray,
                             cut: Fraction) -> float:
    """F1 for the signal with ``(c, c + cut)`` removed next to its left endpoint ``c``."""
    f = scenario.signal.sample(grid)
    sup = f.support()
    if sup is None:
        return 0.0
    c = float(scenario.signal.params[1]) if scenario.signal.kind == "power_cusp" else sup[0] * grid.step
    x = np.where(grid.t >= c + float(cut), f.samples, 0)
    return scenario.lattice.inv_b * grid.step * math.fsum(np.abs(x) ** 2 * G0)


def divergence_probe(scenario: Scenario, levels: Optional[Sequence] = None,
                     family: Optional[str] = None) -> VerdictReport:
    """Evaluate F1 along an increasing family and match it to the analytic growth law.

    ``window`` family (default for failure_bcf and the identity classes): the
    window cut to ``[-T, T]`` for the given T levels; F1 should grow like
    ``(2T/a + 1) ||f||^2 / b``.  ``signal`` family (default for failure_cf):
    the signal with a gap of width ``delta`` cut next to its singular endpoint,
    for the given delta levels; against a cusp window ``F1`` grows like
    ``log(1/delta)`` (or the matching power law).  The verdict is
    ``diverges_as_expected`` iff every level-to-level growth is within 20% of
    the analytic growth, otherwise ``fail``.
    """
    family = family or ("signal" if scenario.hypothesis_class == "failure_cf" else "window")
    trace: List[Tuple[float, float]] = []
    predicted: List[float] = []
    if family == "window":
        levels = list(levels or DEFAULT_BCF_LEVELS)
        for T in levels:
            f1, law = _window_truncation_level(scenario, float(T))
            trace.append((float(T), f1))
            predicted.append(law)
        observed = [trace[i + 1][1] / trace[i][1] if trace[i][1] > 0 else math.inf
                    for i in range(len(trace) - 1)]
        expected = [predicted[i + 1] / predicted[i] for i in range(len(trace) - 1)]
        growth_kind = "ratio"
    elif family == "signal":
        levels = [as_fraction(d) for d in (levels or DEFAULT_CF_LEVELS)]
        grid = scenario.grid()
        scenario.lattice.check(grid)
        g = scenario.window.sample(grid)
        G0 = correlation_g(g, scenario.lattice, 0).on_grid().real
        p = 2 * _cusp_exponent(scenario.window) + 2 * _cusp_exponent(scenario.signal)
        for d in levels:
            trace.append((float(d), _signal_truncation_level(scenario, grid, g, G0, d)))
            dd = float(d)
            law = math.log(1 / dd) if abs(p - 1) < 1e-12 else (dd ** (1 - p) - 1) / (p - 1)
            predicted.append(scenario.lattice.inv_b * law)
        observed = [trace[i + 1][1] - trace[i][1] for i in range(len(trace) - 1)]
        expected = [predicted[i + 1] - predicted[i] for i in range(len(trace) - 1)]
        growth_kind = "increment"
    else:
        raise ValueError(f"unknown probe family {family!r}")

    matched = all(abs(o - e) <= GROWTH_TOLERANCE * abs(e) for o, e in zip(observed, expected))
    monotone = all(trace[i + 1][1] >= trace[i][1] for i in range(len(trace) - 1))
    verdict = "diverges_as_expected" if matched and monotone and len(observed) > 0 else "fail"
    notes = [
        f"F1 {growth_kind}s {'match' if matched else 'do not match'} the analytic growth law within "
        f"{GROWTH_TOLERANCE:.0%} across {len(trace)} levels ({family} truncation family)"
    ]
    details = {"family": family, "observed_growth": observed, "expected_growth": expected,
               "predicted_levels": predicted, "monotone": monotone}
    return VerdictReport(scenario.name, None, None, None, None, verdict, trace, notes, details)


def default_scenarios() -> List[Scenario]:
    """One scenario per hypothesis regime plus both failure probes."""
    half = Fraction(1, 2)
    d = Fraction(1, 1000)
    box01 = WindowSpec("box", (0, 1))
    cusp = WindowSpec("power_cusp", (0.25, 0, 1))
    out = [
        Scenario("box_onb", box01, LatticeSpec(1, 1), box01, "bcf", "identity_holds", d),
        Scenario("scaled_box", WindowSpec("box", (0, 1), 2.0), LatticeSpec(1, 1),
                 WindowSpec("triangle", (-1, 1.5)), "bcf", "identity_holds", d),
        Scenario("half_overlap_box", box01, LatticeSpec(half, 1), WindowSpec("triangle", (-0.5, 2)),
                 "bcf", "identity_holds", d),
        Scenario("cusp_window_bounded_signal", cusp, LatticeSpec(1, 1), WindowSpec("box", (0, 3)),
                 "bcf", "identity_holds", d),
        Scenario("triangle", WindowSpec("triangle", (0, 2)), LatticeSpec(1, 1), WindowSpec("gaussian", (1,)),
                 "cc", "identity_holds", d),
        Scenario("gaussian_frame", WindowSpec("gaussian", (1,)), LatticeSpec(1, half), WindowSpec("gaussian", (2,)),
                 "cc", "identity_holds", d),
        Scenario("cusp_signal_cf", box01, LatticeSpec(1, 1), cusp, "cf", "identity_holds", d),
        Scenario("failure_bcf", WindowSpec("box", (-math.inf, math.inf)), LatticeSpec(1, 1), box01,
                 "failure_bcf", "diverges", Fraction(1, 100)),
        Scenario("failure_cf", cusp, LatticeSpec(1, 1), cusp, "failure_cf", "diverges",
                 Fraction(1, 2**12), span=2.0),
    ]
    return out


def expectation_met(scenario: Scenario, report: VerdictReport) -> bool:
    want = "pass" if scenario.expected == "identity_holds" else "diverges_as_expected"
    return report.verdict == want


def scenario_suite(scenarios: Optional[Sequence[Scenario]] = None, tol: float = 1e-6, seed: int = 42,
                   subset_trials: int = 200) -> List[Dict]:
    """Run every scenario; per-scenario errors land in the report instead of aborting."""
    scenarios = default_scenarios() if scenarios is None else list(scenarios)
    out = []
    for sc in scenarios:
        entry: Dict = {"scenario": sc.to_dict()}
        try:
            if sc.hypothesis_class.startswith("failure"):
                rep = divergence_probe(sc)
            else:
                rep = verify_identity(sc, tol=tol, seed=seed, subset_trials=subset_trials)
            entry["report"] = rep.to_dict()
            entry["expectation_met"] = expectation_met(sc, rep)
        except Exception as exc:  # reported, not raised
            entry["error"] = f"{type(exc).__name__}: {exc}"
            entry["expectation_met"] = False
        out.append(entry)
    return out


def suite_passed(results: Sequence[Dict]) -> bool:
    return all(r["expectation_met"] for r in results)

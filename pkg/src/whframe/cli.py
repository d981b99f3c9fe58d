"""Command-line front end.

Every command is a pure function of its configuration: the same flags (or
config file) and seed give byte-identical output files.

Exit codes: 0 success, 1 configuration error, 2 identity check failed,
3 divergence probe did not match its growth law.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Sequence

from .correlation import LatticeSpec, build_table, cc_report, table_to_csv
from .gabor import GaborSystem, frame_bounds_estimate
from .grid import WINDOW_KINDS, GridCompatibilityError, GridSpec
from .reporting import dumps
from .verifier import (HYPOTHESIS_CLASSES, Scenario, WindowSpec, auto_k_max, divergence_probe, scenario_suite,
                       suite_passed, verify_identity)
from .walnut import PartialSumSpec, convergence_diagnostics, partial_norm_estimate

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_MISMATCH = 0, 1, 2, 3

DEFAULTS: Dict[str, object] = {
    "out": None,
    "seed": 42,
    "delta": "1/1000",
    "oversample": None,
    "span": 8.0,
    "tol": 1e-6,
    "k_max": None,
    "window": "gaussian:1",
    "signal": "gaussian:2",
    "a": "1",
    "b": "1/2",
    "hypothesis_class": None,
    "method": "rayleigh_extremes",
    "subset_trials": 200,
    "iters": 200,
    "probes": 8,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def parse_rational(text, field: str, exact_decimal: bool = True) -> Fraction:
    """``p/q`` string, integer, or decimal.

    With ``exact_decimal`` a decimal must equal its binary floating-point
    value (``0.5`` yes, ``0.3333`` no); otherwise it is read digit for digit.
    """
    s = str(text).strip()
    try:
        if "/" in s:
            p, q = s.split("/")
            val = Fraction(int(p), int(q))
        else:
            val = Fraction(s)
            if exact_decimal and val.denominator != 1 and Fraction(float(s)) != val:
                raise ConfigError(f"{field} must be a rational p/q (decimal {s} is not exact)")
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{field} must be a rational p/q, got {s!r}") from None
    if val <= 0:
        raise ConfigError(f"{field} must be positive")
    return val


def _param(tok: str, field: str):
    tok = tok.strip()
    if tok in ("inf", "+inf", "-inf"):
        return float(tok)
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"{field}: bad parameter {tok!r}") from None


def parse_window(text: str, field: str = "window") -> WindowSpec:
    """``[scale*]kind:p1,p2,...`` e.g. ``gaussian:1``, ``2*box:0,1``, ``power_cusp:0.25,0,1``."""
    s = str(text).strip()
    scale = 1.0
    if "*" in s:
        head, s = s.split("*", 1)
        try:
            scale = float(head)
        except ValueError:
            raise ConfigError(f"{field}: bad scale {head!r}") from None
    kind, _, rest = s.partition(":")
    kind = kind.strip()
    if kind not in WINDOW_KINDS or kind == "user_samples":
        raise ConfigError(f"{field}: unknown kind {kind!r}")
    params = tuple(_param(p, field) for p in rest.split(",")) if rest.strip() else ()
    need = {"gaussian": 1, "box": 2, "triangle": 2, "power_cusp": 3}[kind]
    if len(params) != need:
        raise ConfigError(f"{field}: {kind} takes {need} parameter(s), got {len(params)}")
    spec = WindowSpec(kind, params, scale)
    try:
        spec.sample(GridSpec(Fraction(1, 4), -4, 4))
    except ValueError as exc:
        raise ConfigError(f"{field}: {exc}") from None
    return spec


def _common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=S, help="JSON file with the same keys as the flags")
    p.add_argument("--out", metavar="PATH", default=S, help="output file (stdout if omitted)")
    p.add_argument("--seed", type=int, default=S)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--delta", default=S, help="grid step, p/q or decimal")
    g.add_argument("--oversample", type=int, default=S,
                   help="grid step 1/(N lcm(den a, num b))")
    p.add_argument("--span", type=float, default=S, help="grid covers [-T, T]")
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--k-max", dest="k_max", type=int, default=S)
    p.add_argument("--window", default=S)
    p.add_argument("--signal", default=S)
    p.add_argument("--a", default=S)
    p.add_argument("--b", default=S)
    p.add_argument("--class", dest="hypothesis_class", choices=HYPOTHESIS_CLASSES, default=S)
    p.add_argument("--method", choices=("rayleigh_extremes", "dense_eigen"), default=S)
    p.add_argument("--subset-trials", dest="subset_trials", type=int, default=S)
    p.add_argument("--iters", type=int, default=S)
    p.add_argument("--probes", type=int, default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whframe", description="Gabor frame identity checks on a sampled line")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "compare coefficient energy with the Walnut right-hand side",
        "gk": "export the correlation functions G_k as CSV",
        "diagnose": "partial-sum convergence traces and norm estimates",
        "bounds": "estimate frame bounds",
        "cc": "CC-condition report",
        "suite": "run the default scenario suite",
    }
    for name, h in helps.items():
        _common(sub.add_parser(name, help=h))
    return parser


def resolve_config(ns: argparse.Namespace) -> Dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    cfg = dict(DEFAULTS)
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    path = getattr(ns, "config", None)
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be a JSON object")
        for key, val in data.items():
            k = key.replace("-", "_")
            if k == "class":
                k = "hypothesis_class"
            if k not in DEFAULTS:
                raise ConfigError(f"config: unknown field {key!r}")
            cfg[k] = val
    if "oversample" in flags:
        cfg["delta"] = None
    if "delta" in flags:
        cfg["oversample"] = None
    cfg.update(flags)
    if cfg["oversample"] is not None:
        cfg["delta"] = None
    _validate(cfg)
    return cfg


def _validate(cfg: Dict) -> None:
    for field in ("tol", "span"):
        try:
            v = float(cfg[field])
        except (TypeError, ValueError):
            raise ConfigError(f"{field} must be a number") from None
        if not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"{field} must be positive")
    for field in ("seed", "subset_trials", "iters", "probes", "k_max", "oversample"):
        v = cfg[field]
        if v is None and field in ("k_max", "oversample"):
            continue
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"{field} must be a non-negative integer")
    if cfg["oversample"] is not None and cfg["oversample"] < 1:
        raise ConfigError("oversample must be >= 1")
    if cfg["hypothesis_class"] is not None and cfg["hypothesis_class"] not in HYPOTHESIS_CLASSES:
        raise ConfigError(f"class must be one of {HYPOTHESIS_CLASSES}")
    if cfg["method"] not in ("rayleigh_extremes", "dense_eigen"):
        raise ConfigError("method must be rayleigh_extremes or dense_eigen")


def lattice_of(cfg: Dict) -> LatticeSpec:
    return LatticeSpec(parse_rational(cfg["a"], "a"), parse_rational(cfg["b"], "b"))


def delta_of(cfg: Dict, lattice: LatticeSpec) -> Fraction:
    if cfg["oversample"] is not None:
        base = math.lcm(lattice.a.denominator, lattice.b.numerator)
        return Fraction(1, cfg["oversample"] * base)
    return parse_rational(cfg["delta"], "delta", exact_decimal=False)


def infer_class(window: WindowSpec, signal: WindowSpec) -> str:
    if window.amalgam:
        return "cc"
    if signal.bounded and signal.compact:
        return "bcf"
    return "cf"


def scenario_of(cfg: Dict, name: str = "cli") -> Scenario:
    lattice = lattice_of(cfg)
    window = parse_window(cfg["window"], "window")
    signal = parse_window(cfg["signal"], "signal")
    cls = cfg["hypothesis_class"] or infer_class(window, signal)
    expected = "diverges" if cls.startswith("failure") else "identity_holds"
    try:
        sc = Scenario(name, window, lattice, signal, cls, expected, delta_of(cfg, lattice),
                      float(cfg["span"]), cfg["k_max"])
        lattice.check(sc.grid())
    except GridCompatibilityError as exc:
        raise ConfigError(f"delta: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"class: {exc}") from None
    return sc


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _report(cfg: Dict, command: str, body: Dict) -> str:
    return dumps({"command": command, "config": cfg, **body}) + "\n"


def cmd_verify(cfg: Dict) -> int:
    sc = scenario_of(cfg)
    if sc.hypothesis_class.startswith("failure"):
        rep = divergence_probe(sc)
    else:
        rep = verify_identity(sc, tol=float(cfg["tol"]), seed=cfg["seed"], subset_trials=cfg["subset_trials"])
    _emit(_report(cfg, "verify", {"scenario": sc.to_dict(), "report": rep.to_dict()}), cfg["out"])
    if sc.expected == "diverges":
        return EXIT_OK if rep.verdict == "diverges_as_expected" else EXIT_MISMATCH
    return EXIT_OK if rep.verdict == "pass" else EXIT_FAIL


def _table(cfg: Dict):
    sc = scenario_of(cfg)
    g = sc.window.sample(sc.grid())
    k_max = cfg["k_max"] if cfg["k_max"] is not None else auto_k_max(g, sc.lattice)
    return sc, g, build_table(g, sc.lattice, k_max)


def cmd_gk(cfg: Dict) -> int:
    _, _, table = _table(cfg)
    _emit(table_to_csv(table), cfg["out"])
    return EXIT_OK


def cmd_diagnose(cfg: Dict) -> int:
    """JSON report; with ``--out X.json`` the traces also go to ``X_symmetric.csv`` etc."""
    sc, g, table = _table(cfg)
    f = sc.signal.sample(table.grid)
    conv = convergence_diagnostics(table, f, subset_trials=cfg["subset_trials"], seed=cfg["seed"])
    norms = [{"K": K, "op_norm_est": partial_norm_estimate(table, PartialSumSpec.symmetric(K), cfg["iters"],
                                                           seed=cfg["seed"])}
             for K in table.ks if K >= 0]
    _emit(_report(cfg, "diagnose", {"scenario": sc.to_dict(), "convergence": conv.to_dict(),
                                    "partial_norms": norms}), cfg["out"])
    if cfg["out"] is not None:
        base = Path(cfg["out"])
        stem = base.with_suffix("")
        Path(f"{stem}_symmetric.csv").write_text(conv.symmetric_csv())
        rows = ["K,L,distance"] + [f"{r['K']},{r['L']},{r['distance']:.17g}" for r in conv.rectangular]
        Path(f"{stem}_rectangular.csv").write_text("\n".join(rows) + "\n")
        rows = ["M,origin,core,deviation,allowed,ok"] + [
            f"{' '.join(map(str, r['M']))},{r['origin']},{r['core']},{r['deviation']:.17g},"
            f"{r['allowed']:.17g},{int(r['ok'])}" for r in conv.subsets]
        Path(f"{stem}_subsets.csv").write_text("\n".join(rows) + "\n")
    return EXIT_OK


def cmd_bounds(cfg: Dict) -> int:
    sc = scenario_of(cfg)
    g = sc.window.sample(sc.grid())
    rep = frame_bounds_estimate(GaborSystem.build(g, sc.lattice), probes=cfg["probes"], seed=cfg["seed"],
                                method=cfg["method"], iters=cfg["iters"])
    _emit(_report(cfg, "bounds", {"bounds": rep.to_dict()}), cfg["out"])
    return EXIT_OK


def cmd_cc(cfg: Dict) -> int:
    _, _, table = _table(cfg)
    _emit(_report(cfg, "cc", {"k_max": table.k_max, "cc": cc_report(table).to_dict()}), cfg["out"])
    return EXIT_OK


def cmd_suite(cfg: Dict) -> int:
    results = scenario_suite(tol=float(cfg["tol"]), seed=cfg["seed"], subset_trials=cfg["subset_trials"])
    ok = suite_passed(results)
    _emit(_report(cfg, "suite", {"passed": ok, "reports": results}), cfg["out"])
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "gk": cmd_gk, "diagnose": cmd_diagnose, "bounds": cmd_bounds,
            "cc": cmd_cc, "suite": cmd_suite}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(ns)
        return COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"whframe {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

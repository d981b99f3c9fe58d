import math
from fractions import Fraction

import pytest

from whframe.correlation import LatticeSpec
from whframe.reporting import dumps
from whframe.verifier import (Scenario, WindowSpec, default_scenarios, divergence_probe, expectation_met,
                              scenario_suite, suite_passed, verify_identity)

from conftest import SEED

BOX = WindowSpec("box", (0, 1))
CUSP = WindowSpec("power_cusp", (0.25, 0, 1))


def by_name(name):
    return next(s for s in default_scenarios() if s.name == name)


def test_window_spec_properties():
    assert BOX.bounded and BOX.compact and BOX.square_integrable and BOX.amalgam
    assert not CUSP.bounded and CUSP.compact and CUSP.square_integrable and not CUSP.amalgam
    line = WindowSpec("box", (-math.inf, math.inf))
    assert not line.compact and not line.square_integrable
    assert WindowSpec("box", (0, 1), 2.0).label() == "2*box:0,1"


def test_scenario_validation():
    with pytest.raises(ValueError, match="bounded"):
        Scenario("x", BOX, LatticeSpec(1, 1), CUSP, "bcf", "identity_holds")
    with pytest.raises(ValueError, match="unbounded G0"):
        Scenario("x", BOX, LatticeSpec(1, 1), CUSP, "failure_cf", "diverges")
    with pytest.raises(ValueError, match="inconsistent"):
        Scenario("x", BOX, LatticeSpec(1, 1), BOX, "bcf", "diverges")
    with pytest.raises(ValueError):
        Scenario("x", BOX, LatticeSpec(1, 1), BOX, "magic", "identity_holds")


def test_bcf_box_passes():
    rep = verify_identity(by_name("box_onb"), seed=SEED)
    assert rep.verdict == "pass"
    assert rep.relative_gap <= 1e-8
    assert rep.lhs == pytest.approx(1.0, abs=1e-12)
    assert rep.details["finite_sum"]


def test_cf_cusp_signal_passes():
    rep = verify_identity(by_name("cusp_signal_cf"), seed=SEED)
    assert rep.verdict == "pass"
    # F1 = int_0^1 t^(-1/2) dt = 2 up to the quadrature error at delta = 1e-3
    assert rep.rhs.f1 == pytest.approx(2.0, abs=0.1)
    assert rep.rhs.f2 == 0


def test_cc_gaussian_passes():
    rep = verify_identity(by_name("gaussian_frame"), seed=SEED, subset_trials=20)
    assert rep.verdict == "pass"
    assert rep.convergence.verdicts["unconditional_converges"]
    assert rep.relative_gap <= 1e-6
    assert "consistent with" in rep.notes[0]


def test_failure_bcf_linear_growth():
    rep = divergence_probe(by_name("failure_bcf"))
    assert rep.verdict == "diverges_as_expected"
    for T, f1 in rep.refinement_trace:
        assert abs(f1 - (2 * T + 1)) <= 0.2 * (2 * T + 1)
    assert all(abs(r - 2) < 0.2 for r in rep.details["observed_growth"])


def test_failure_cf_log_growth():
    rep = divergence_probe(by_name("failure_cf"))
    assert rep.verdict == "diverges_as_expected"
    for inc in rep.details["observed_growth"]:
        assert abs(inc - math.log(2)) <= 0.2 * math.log(2)


def test_control_bounded_case_does_not_diverge():
    rep = divergence_probe(by_name("box_onb"))
    assert rep.verdict == "fail"
    f1 = [v for _, v in rep.refinement_trace]
    assert max(f1) - min(f1) <= 1e-12


def test_probe_unknown_family():
    with pytest.raises(ValueError):
        divergence_probe(by_name("box_onb"), family="spiral")


def test_verify_routes_failure_class_to_probe():
    rep = verify_identity(by_name("failure_bcf"))
    assert rep.verdict == "diverges_as_expected" and rep.lhs is None


def test_empty_suite():
    assert scenario_suite([]) == []
    assert suite_passed([])


def test_suite_records_errors():
    bad = Scenario("bad_grid", BOX, LatticeSpec(Fraction(1, 3), 1), BOX, "bcf", "identity_holds")
    out = scenario_suite([bad])
    assert not out[0]["expectation_met"]
    assert "GridCompatibilityError" in out[0]["error"]


def test_suite_deterministic_subset():
    scs = [by_name(n) for n in ("box_onb", "half_overlap_box", "triangle", "failure_cf")]
    assert dumps(scenario_suite(scs, seed=SEED, subset_trials=20)) == dumps(scenario_suite(scs, seed=SEED,
                                                                                          subset_trials=20))


def test_default_suite_meets_expectations():
    results = scenario_suite(seed=SEED)
    assert [r["scenario"]["name"] for r in results] == [s.name for s in default_scenarios()]
    assert suite_passed(results), [r for r in results if not r["expectation_met"]]


def test_refined_and_tightened_suite_keeps_verdicts():
    base = scenario_suite(seed=SEED)
    fine = scenario_suite([s.refined(2) for s in default_scenarios()], tol=1e-7, seed=SEED)
    assert [r["report"]["verdict"] for r in base] == [r["report"]["verdict"] for r in fine]


def test_expectation_met():
    sc = by_name("box_onb")
    assert expectation_met(sc, verify_identity(sc))

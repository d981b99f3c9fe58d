import csv
import io
from fractions import Fraction

import numpy as np
import pytest

from whframe.correlation import LatticeSpec, build_table
from whframe.gabor import GaborSystem, coefficient, coefficient_energy, frame_operator_apply
from whframe.grid import GridSignal, GridSpec, inner_product, make_window, norm, random_signal
from whframe.walnut import (CertificateError, PartialSumSpec, _core, convergence_diagnostics, identity_rhs,
                            norm_bound_check, partial_norm_estimate, periodized_product, plancherel_rhs,
                            polarization_check, walnut_adjoint_apply, walnut_full_apply, walnut_partial_apply)

from conftest import SEED

G = GridSpec.from_span(Fraction(1, 100), -4, 4)


def table_for(kind, params, a, b, k_max, grid=G, scale=1.0):
    g = make_window(kind, params, grid)
    g = g if scale == 1.0 else g * scale
    return g, build_table(g, LatticeSpec(a, b), k_max)


def probe(grid, seed, support=(-2, 2), smooth=False):
    return random_signal(grid, np.random.default_rng(seed), support, smooth)


def test_spec_indices_and_labels():
    assert PartialSumSpec.symmetric(2).indices() == (-2, -1, 0, 1, 2)
    assert PartialSumSpec.rectangular(2, 0).indices() == (0, 1, 2)
    assert PartialSumSpec.subset([3, -1]).indices() == (3, -1)
    assert PartialSumSpec.rectangular(1, 3).label() == "rectangular(1,3)"
    assert 3 in PartialSumSpec.subset([3])
    with pytest.raises(ValueError):
        PartialSumSpec.subset([1, 1])
    with pytest.raises(ValueError):
        PartialSumSpec("spiral")


def test_box_partial_sums():
    _, t = table_for("box", (0, 1), 1, 1, 3)
    f = probe(G, 1)
    assert np.array_equal(walnut_partial_apply(t, f, PartialSumSpec.symmetric(0)).samples, f.samples)
    assert np.all(walnut_partial_apply(t, f, PartialSumSpec.subset([1, 2])).samples == 0)


def test_full_apply_box():
    _, t = table_for("box", (0, 1), 1, 1, 2)
    f = probe(G, 2)
    assert np.array_equal(walnut_full_apply(t, f).samples, f.samples)


@pytest.mark.parametrize("kind,params,b,k_max", [("triangle", (0, 2), 1, 2), ("gaussian", (1,), Fraction(1, 2), 4)])
def test_full_apply_matches_frame_operator(kind, params, b, k_max):
    g, t = table_for(kind, params, 1, b, k_max)
    sys = GaborSystem.build(g, LatticeSpec(1, b))
    f = probe(G, 3, smooth=True)
    assert norm(walnut_full_apply(t, f) - frame_operator_apply(sys, f)) <= 1e-6 * norm(f)


def test_full_apply_refuses_uncertified_truncation():
    _, t = table_for("triangle", (0, 3), 1, 2, 1)
    assert t.tail_bound > 0
    with pytest.raises(CertificateError):
        walnut_full_apply(t, probe(G, 4))
    with pytest.raises(CertificateError):
        walnut_partial_apply(t, probe(G, 4), PartialSumSpec.symmetric(3))


def test_terms_beyond_support_are_certified_zero():
    _, t = table_for("box", (0, 1), 1, 1, 1)
    f = probe(G, 5)
    assert np.all(walnut_partial_apply(t, f, PartialSumSpec.subset([5, -7])).samples == 0)


def test_adjoint_relation():
    _, t = table_for("gaussian", (1,), 1, Fraction(2, 3), 3)
    x, y = probe(G, 6), probe(G, 7)
    for spec in (PartialSumSpec.rectangular(2, 0), PartialSumSpec.subset([-3, 1]), PartialSumSpec.symmetric(3)):
        lhs = inner_product(walnut_partial_apply(t, x, spec), y)
        rhs = inner_product(x, walnut_adjoint_apply(t, y, spec))
        assert abs(lhs - rhs) <= 1e-12 * norm(x) * norm(y)


def test_identity_rhs_box():
    _, t = table_for("box", (0, 1), 1, 1, 2)
    r = identity_rhs(t, make_window("box", (0, 1), G))
    assert (r.f1, r.f2, r.total) == (1.0, 0.0, 1.0)
    z = identity_rhs(t, GridSignal.zeros(G))
    assert z.total == 0


def test_identity_rhs_gaussian(gauss_system):
    f = make_window("gaussian", (2,), gauss_system.grid)
    r = identity_rhs(gauss_system.table, f)
    lhs = coefficient_energy(gauss_system.sys, f)
    assert abs(lhs - r.total) <= 1e-6 * lhs
    assert r.pairing_residual() <= 1e-10
    assert abs(r.f2 - r.f2_two_sided.real) <= 1e-10
    assert abs(r.f2_two_sided.imag) <= 1e-10


def test_identity_rhs_nonsymmetric_schedule():
    _, t = table_for("gaussian", (1,), 1, Fraction(1, 2), 4)
    f = probe(G, 8)
    r = identity_rhs(t, f, PartialSumSpec.rectangular(2, 0))
    assert r.convergence_mode_used == "rectangular(2,0)"
    assert r.f2 == pytest.approx(r.f2_two_sided.real)


def test_identity_terms_csv():
    _, t = table_for("box", (0, 1), 1, 1, 1)
    r = identity_rhs(t, make_window("box", (0, 1), G))
    rows = list(csv.reader(io.StringIO(r.terms_csv())))
    assert rows[0] == ["k", "re_term", "im_term"] and len(rows) == 4


def test_partial_norm_box():
    _, t = table_for("box", (0, 1), 1, 1, 2)
    assert partial_norm_estimate(t, PartialSumSpec.symmetric(1), 20) == pytest.approx(1, abs=1e-6)
    assert partial_norm_estimate(t, PartialSumSpec.rectangular(2, 0), 20) == pytest.approx(1, abs=1e-6)
    assert partial_norm_estimate(t, PartialSumSpec.subset([1, -2]), 20) == 0


def test_partial_norm_scaled_box():
    _, t = table_for("box", (0, 1), 1, 1, 3, scale=2.0)
    for K in range(4):
        assert partial_norm_estimate(t, PartialSumSpec.symmetric(K), 20) == pytest.approx(4, abs=1e-6)


def test_partial_norms_gaussian_coarse(gauss_coarse):
    dense = np.linalg.eigvalsh(
        __import__("whframe").frame_operator_matrix(gauss_coarse.sys))[-1]
    t = gauss_coarse.table
    norms = [partial_norm_estimate(t, PartialSumSpec.symmetric(K), 200, seed=SEED) for K in range(1, 5)]
    assert all(y >= x - 1e-12 * x for x, y in zip(norms, norms[1:]))
    assert max(norms) == pytest.approx(dense, rel=0.05)


def test_core():
    assert _core([]) == -1
    assert _core([1, 2]) == -1
    assert _core([0, 1, -1, 2]) == 1
    assert _core(range(-3, 4)) == 3


def test_diagnostics_box():
    g, t = table_for("box", (0, 1), 1, 1, 3)
    rep = convergence_diagnostics(t, make_window("box", (0, 1), G), subset_trials=10, seed=SEED, norm_iters=5)
    assert all(r["distance"] == 0 for r in rep.symmetric)
    assert all(rep.verdicts.values())


def test_diagnostics_gaussian(gauss_system):
    f = make_window("gaussian", (2,), gauss_system.grid)
    rep = convergence_diagnostics(gauss_system.table, f, subset_trials=20, seed=SEED, norm_iters=10)
    d = [r["distance"] for r in rep.symmetric]
    assert d[-1] <= 1e-6
    assert all(y <= x for x, y in zip(d[1:], d[2:]))
    assert rep.verdicts["unconditional_converges"]
    # seeded: the same subset list on a second run
    rep2 = convergence_diagnostics(gauss_system.table, f, subset_trials=20, seed=SEED, norm_iters=10)
    assert [r["M"] for r in rep.subsets] == [r["M"] for r in rep2.subsets]


def test_diagnostics_cusp_window_flags_false():
    grid = GridSpec.from_span(Fraction(1, 1024), -2, 4)
    g, t = table_for("power_cusp", (0.25, 0, 1), 1, 1, 1, grid)
    rep = convergence_diagnostics(t, make_window("box", (0, 3), grid), subset_trials=4, seed=SEED, norm_iters=5)
    assert not any(rep.verdicts.values())
    assert not rep.evidence["g0_bounded"]
    assert min(rep.evidence["g0_growth"]) > 1.4


def test_diagnostics_rejects_large_max_k():
    _, t = table_for("box", (0, 1), 1, 1, 1)
    with pytest.raises(ValueError):
        convergence_diagnostics(t, probe(G, 1), max_k=3)


def test_polarization_identity_and_walnut():
    _, t = table_for("gaussian", (1,), 1, Fraction(1, 2), 4)
    x, y = probe(G, 11), probe(G, 12)
    assert polarization_check(lambda v: v, x, y) <= 1e-10
    op = lambda v: walnut_partial_apply(t, v, PartialSumSpec.symmetric(2))  # noqa: E731
    assert polarization_check(op, x, y) <= 1e-8 * norm(x) * norm(y)


def test_norm_bound_diagonal_operator():
    rng = np.random.default_rng(SEED)
    d = rng.standard_normal(G.size)
    op = lambda v: GridSignal(G, d * v.samples)  # noqa: E731
    chk = norm_bound_check(op, G, probes=100, seed=SEED, adjoint=op)
    assert chk.holds
    assert chk.op_norm_est <= np.abs(d).max() * (1 + 1e-12)


def test_periodized_product_box():
    g = make_window("box", (0, 1), G)
    lat = LatticeSpec(1, 1)
    assert np.all(periodized_product(g, g, lat, 0).values == 1)
    assert np.all(periodized_product(g, g, lat, 5).values == 0)


def test_plancherel_per_n(gauss_coarse):
    s = gauss_coarse
    f = make_window("gaussian", (2,), s.grid)
    for n in (-1, 0, 1):
        H = periodized_product(f, s.g, s.lattice, n)
        lhs = sum(abs(coefficient(s.sys, f, m, n)) ** 2 for m in s.sys.ms)
        assert lhs == pytest.approx(plancherel_rhs(H, s.lattice), abs=1e-8)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh

from kinkbench.analysis import (
    SWEEP_HEADER,
    AnalysisError,
    _oriented_shadow,
    classify_kinks,
    estimate_threshold,
    find_zeros,
    fit_power_law,
    poincare_constants,
    shadow_profile,
    sweep,
)
from kinkbench.energy import Grid
from kinkbench.minimize import reflect, result_from_field

from cases import SPECS, setup, solve


# -- zeros -------------------------------------------------------------------------------


def test_positive_field_has_no_zeros():
    g = Grid(-2.0, 2.0, 101)
    assert len(find_zeros(1.0 + g.x**2, g)) == 0


def test_odd_field_has_origin_zero():
    g = Grid(-2.0, 2.0, 101)
    zs = find_zeros(np.sin(g.x) * np.exp(-g.x**2), g)
    assert 0.0 in zs.zeros


@settings(max_examples=100, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_step_crossing_recovered_within_h(xbar):
    prof, lm = setup("dg")
    g = Grid(-3.5, 3.5, 701)
    x = g.x
    u = np.sqrt(np.maximum(prof.mu(x), 0.0)) * np.where(x > xbar, 1.0, -1.0)
    zs = find_zeros(u, g)
    assert len(zs) == 1
    assert abs(zs.zeros[0] - xbar) <= g.h


def test_grazing_minimum_reported_not_counted():
    g = Grid(-2.0, 2.0, 401)
    u = g.x**2 + 1e-5
    zs = find_zeros(u, g)
    assert len(zs) == 0 and len(zs.grazing) == 1


def test_periodic_zeros_wrap():
    g = Grid(-math.pi, math.pi, 201, "periodic")
    zs = find_zeros(np.sin(g.x + 0.3), g)
    assert len(zs) == 2
    assert sorted(round(z, 6) for z in zs.zeros) == [round(-0.3, 6), round(math.pi - 0.3, 6)]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_zeros_strictly_increasing(seed):
    rng = np.random.default_rng(seed)
    g = Grid(-1.0, 1.0, 64)
    zs = find_zeros(rng.normal(size=64), g)
    assert all(a < b for a, b in zip(zs.zeros, zs.zeros[1:]))
    assert len(zs.signs) == len(zs) + 1


# -- shadow profile -----------------------------------------------------------------------


def test_shadow_profile_small_forcing_residual():
    sp = shadow_profile(-1.0, 0.01)
    assert sp.converged
    assert sp.residual_max < 1e-4


def test_shadow_profile_boundary_data():
    sp = shadow_profile(-0.7, 0.3, S=6.0, n=800)
    assert sp.v[0] == -math.sqrt(0.7 * 6.0)
    assert sp.v[-1] == 0.3 / (0.7 * 6.0)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 1.4])
def test_shadow_profile_single_zero_for_donut_edge(alpha):
    prof, lm = setup("donut")
    mu1 = -2.0 * float(prof.f(lm.xi))
    sp = shadow_profile(mu1, alpha * float(prof.f(lm.xi)))
    assert len(find_zeros(sp.v, sp.s)) == 1


def test_shadow_profile_rejects_bad_orientation():
    with pytest.raises(ValueError):
        shadow_profile(1.0, 0.5)
    with pytest.raises(ValueError):
        shadow_profile(-1.0, -0.5)


def test_oriented_shadow_symmetries():
    base = shadow_profile(-0.8, 0.4)
    s = np.linspace(-4, 4, 81)
    assert np.allclose(_oriented_shadow(0.8, 0.4)(s), base(-s), atol=1e-14)
    assert np.allclose(_oriented_shadow(-0.8, -0.4)(s), -base(s), atol=1e-14)


# -- classification ------------------------------------------------------------------------


def test_donut_kinks_above_critical():
    prof, lm = setup("donut")
    r, *_ = solve("donut", 0.02, 2.0)
    rep = classify_kinks(r, prof, lm)
    # the origin is dark (mu(0) < 0), so the middle transition is a giant kink
    assert rep.types == ["standard", "giant", "standard"]
    assert [k.nearest_landmark for k in rep.kinks] == ["-zeta", "0", "+zeta"]


def test_donut_shadow_giant_shadow():
    prof, lm = setup("donut")
    r, *_ = solve("donut", 0.02, 1.0)
    rep = classify_kinks(r, prof, lm)
    assert rep.types == ["shadow", "giant", "shadow"]
    for k in rep.kinks:
        assert k.profile_error >= 0 and k.amplitude_stat >= 0


def test_giant_plateau_tracks_forcing_ratio():
    prof, lm = setup("donut")
    r, g, _ = solve("donut", 0.01, 1.0)
    # f(0) = 0, so the rescaled field vanishes at the origin
    assert abs(r.field[g.n // 2] / 0.01) < 1e-6
    giant = [k for k in classify_kinks(r, prof, lm).kinks if k.type == "giant"]
    assert giant and giant[0].amplitude_stat < 0.1


def _mirror_name(n):
    if n in ("0", "T/2") or n is None:
        return n
    return ("+" if n[0] == "-" else "-") + n[1:]


@pytest.mark.parametrize("name,alpha", [("donut", 1.0), ("dg", 1.0), ("dg", 2.0)])
def test_classification_reflection_equivariant(name, alpha):
    prof, lm = setup(name)
    r, g, p = solve(name, 0.04, alpha)
    v = reflect(r.field)
    rv = result_from_field(v, g, p, prof, grad_norm=r.grad_norm, iterations=0, seed="reflected",
                           converged=True, tol=r.grad_tol, energies=[])
    a = classify_kinks(r, prof, lm).kinks
    b = classify_kinks(rv, prof, lm).kinks[::-1]
    assert len(a) == len(b) > 0
    for ka, kb in zip(a, b):
        assert kb.location == -ka.location
        assert kb.type == ka.type
        assert kb.nearest_landmark == _mirror_name(ka.nearest_landmark)
        assert kb.profile_error == pytest.approx(ka.profile_error, rel=1e-9, abs=1e-12)
        assert kb.amplitude_stat == pytest.approx(ka.amplitude_stat, rel=1e-9, abs=1e-12)


def test_zero_far_from_landmarks_deferred():
    prof, lm = setup("donut")
    r, g, p = solve("donut", 0.04, 2.0)
    # one crossing midway between xi' and zeta
    mid = 0.5 * (lm.xi_prime + lm.zeta)
    u = np.tanh((g.x - mid) / 0.04)
    u[0] = u[-1] = 0.0
    fake = result_from_field(u, g, p, prof, grad_norm=0.0, iterations=0, seed="fake",
                             converged=True, tol=r.grad_tol, energies=[])
    kinks = classify_kinks(fake, prof, lm).kinks
    assert len(kinks) == 1 and kinks[0].type == "deferred"
    assert kinks[0].reason


def test_periodic_standard_kinks():
    prof, lm = setup("cos")
    r, *_ = solve("cos", 0.05, 3.2, "periodic")
    rep = classify_kinks(r, prof, lm)
    assert rep.types == ["standard", "standard"]


# -- sweeps ---------------------------------------------------------------------------------


def test_sweep_rows_sorted_and_order_independent():
    a = sweep(SPECS["dg"], [0.08, 0.04], [1.0, 0.0])
    b = sweep(SPECS["dg"], [0.04, 0.08], [0.0, 1.0])
    assert a.to_csv() == b.to_csv()
    keys = [(r["epsilon"], r["alpha"]) for r in a.rows]
    assert keys == sorted(keys)
    assert a.to_csv().splitlines()[0] == ",".join(SWEEP_HEADER)


def test_sweep_alpha_zero_row():
    t = sweep(SPECS["dg"], [0.05], [0.0])
    assert len(t.rows) == 1 and t.rows[0]["n_zeros"] == 0 and not t.failed


def test_sweep_failure_recorded():
    t = sweep(SPECS["dg"], [1e-5, 0.08], [1.0])
    assert len(t.rows) == 2
    assert len(t.failed) == 1 and "grid too fine" in t.failed[0]["error"]
    assert t.rows[1]["error"] == ""


def test_sweep_workers_match_serial():
    serial = sweep(SPECS["dg"], [0.08, 0.06], [1.0])
    pooled = sweep(SPECS["dg"], [0.08, 0.06], [1.0], workers=2)
    assert serial.to_csv() == pooled.to_csv()


def test_middle_zero_at_origin():
    # the case-B winner is odd, so the inner zero sits on the origin to roundoff
    for e in (0.08, 0.04):
        assert abs(solve("donut", e, 1.0)[0].zeros().zeros[1]) < 1e-9


# -- power laws ------------------------------------------------------------------------------


def test_power_law_exact():
    eps = [0.08, 0.04, 0.02, 0.01]
    s, r2 = fit_power_law([(e, e) for e in eps])
    assert s == pytest.approx(1.0, abs=1e-12) and r2 == pytest.approx(1.0)
    s, _ = fit_power_law([(e, 3 * e ** (1 / 3)) for e in eps])
    assert s == pytest.approx(1 / 3, abs=1e-12)


def test_power_law_drops_outlier_once():
    eps = [0.01, 0.02, 0.04, 0.08, 0.16]
    pairs = [(e, e ** 0.5) for e in eps[:-1]] + [(0.16, 1e-4)]
    s, r2 = fit_power_law(pairs)
    assert s == pytest.approx(0.5, abs=1e-12) and r2 > 0.99


def test_power_law_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_power_law([(0.1, 1.0)] * 3)
    with pytest.raises(ValueError):
        fit_power_law([(0.1, 1.0), (0.2, 0.0), (0.3, 1.0), (0.4, 1.0)])


# -- thresholds --------------------------------------------------------------------------------


def test_threshold_bisection_contract():
    est = estimate_threshold(SPECS["dg"], 0.04, (1.5, 2.5), "odd_zero_count_change", width=0.02)
    assert est.alpha_lo < est.estimate < est.alpha_hi
    assert est.alpha_hi - est.alpha_lo <= 0.02
    widths = [hi - lo for lo, hi in est.brackets]
    assert all(b < a for a, b in zip(widths, widths[1:]))
    assert est.detector_lo != est.detector_hi
    assert est.closed_form == pytest.approx(2.0102908511764814, rel=1e-12)
    assert est.relative_gap < 0.15


def test_threshold_without_change_fails():
    with pytest.raises(AnalysisError, match="no regime change"):
        estimate_threshold(SPECS["dg"], 0.08, (0.1, 0.2), "zero_count_change")
    with pytest.raises(ValueError):
        estimate_threshold(SPECS["dg"], 0.08, (0.1, 0.2), "sharpness")


# -- Poincare constants -------------------------------------------------------------------------


def _well(x):
    return np.where(np.abs(x) < 1.0, 1.0, -1.0)


def test_square_well_matches_dense_eigensolve():
    g = Grid(-3.0, 3.0, 202)
    c = poincare_constants(_well, g)
    h = g.h
    m = g.n - 2
    K = (np.diag(np.full(m, 2.0)) - np.diag(np.ones(m - 1), 1) - np.diag(np.ones(m - 1), -1)) / h
    M = np.diag(_well(g.x[1:-1]) * h)
    lam = eigh(M, K, eigvals_only=True)[-1]
    assert c.eps0**2 == pytest.approx(lam, abs=1e-6)
    assert 0 < c.eps1 <= c.eps0


@pytest.mark.parametrize("name", ["donut", "dg"])
def test_eps1_below_eps0(name):
    prof, _ = setup(name)
    c = poincare_constants(prof, Grid(-6.0, 6.0, 1201))
    assert 0 < c.eps1 <= c.eps0


def test_no_positive_mu_rejected():
    with pytest.raises(AnalysisError):
        poincare_constants(lambda x: -1.0 - x**2, Grid(-2.0, 2.0, 51))

import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deaiml import dea, linprog
from deaiml.tabular import DmuPanel, FrontierSpec

from oracles import dea_lp_scipy, dea_vertex_oracle


def _panel(X, Y, **kw):
    return DmuPanel.from_arrays(X, Y, **kw)


def _random(seed, n=None, m=None, s=None):
    r = np.random.default_rng(seed)
    n = n or int(r.integers(2, 13))
    m = m or int(r.integers(1, 4))
    s = s or int(r.integers(1, 3))
    return r.uniform(1, 10, (n, m)), r.uniform(1, 10, (n, s))


def test_single_input_single_output_by_hand():
    # VRS frontier through (1,1), (2,3), (4,4); unit (3,2) can reach 3.5 -> theta = 1.75
    X = np.array([[1.0], [2.0], [4.0], [3.0]])
    Y = np.array([[1.0], [3.0], [4.0], [2.0]])
    theta, Z = dea.envelopment(X, Y, X, Y, "VRS")
    assert theta[3] == pytest.approx(1.75, abs=1e-12)
    np.testing.assert_allclose(Z[3], [0, 0.5, 0.5, 0], atol=1e-12)
    # CRS: best ratio y/x is 1.5 at (2,3) -> theta = 1.5 * 3 / 2 = 2.25
    theta_c, _ = dea.envelopment(X, Y, X, Y, "CRS")
    assert theta_c[3] == pytest.approx(2.25, abs=1e-12)


@pytest.mark.parametrize("seed", range(40))
def test_matches_vertex_enumeration(seed):
    X, Y = _random(seed)
    for rts in ("VRS", "CRS"):
        theta, _ = dea.envelopment(X, Y, X, Y, rts)
        oracle = [dea_vertex_oracle(X, Y, o, rts) for o in range(len(X))]
        np.testing.assert_allclose(theta, oracle, atol=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_out_of_sample_matches_external_lp(seed):
    r = np.random.default_rng(100 + seed)
    X, Y = r.uniform(1, 10, (30, 3)), r.uniform(1, 10, (30, 2))
    Xe, Ye = r.uniform(2, 12, (15, 3)), r.uniform(1, 12, (15, 2))
    for rts in ("VRS", "CRS"):
        theta, Z = dea.envelopment(Xe, Ye, X, Y, rts)
        for i in range(15):
            lp = _external_out_of_sample(X, Y, Xe[i], Ye[i], rts)
            if np.isnan(theta[i]):
                assert lp is None
            else:
                assert theta[i] == pytest.approx(lp, abs=1e-8)
                # weights reproduce a feasible point
                assert (Z[i] @ X <= Xe[i] + 1e-8).all()
                assert (Z[i] @ Y >= theta[i] * Ye[i] - 1e-8).all()


def _external_out_of_sample(X, Y, xo, yo, rts):
    from scipy.optimize import linprog as lp
    n, m = X.shape
    s = Y.shape[1]
    c = np.zeros(n + 1)
    c[0] = -1.0
    A_ub = np.vstack([np.column_stack([yo[:, None], -Y.T]), np.column_stack([np.zeros((m, 1)), X.T])])
    b_ub = np.concatenate([np.zeros(s), xo])
    kw = dict(A_eq=np.concatenate([[0.0], np.ones(n)])[None, :], b_eq=[1.0]) if rts == "VRS" else {}
    res = lp(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] + [(0, None)] * n, method="highs", **kw)
    return None if res.status == 2 else -res.fun


def test_infeasible_out_of_sample_point_is_nan():
    X = np.array([[2.0], [3.0]])
    Y = np.array([[1.0], [2.0]])
    theta, Z = dea.envelopment([[1.0]], [[1.0]], X, Y, "VRS")
    assert np.isnan(theta[0])
    assert not Z.any()


def test_mixture_covers_inputs_under_vrs():
    # no single reference uses <= (2, 2), but the average of (1, 3) and (3, 1) does
    X = np.array([[1.0, 3.0], [3.0, 1.0]])
    Y = np.array([[4.0], [4.0]])
    theta, Z = dea.envelopment([[2.0, 2.0]], [[2.0]], X, Y, "VRS")
    assert theta[0] == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(Z[0], [0.5, 0.5], atol=1e-12)


def test_envelopment_program_export_matches():
    X, Y = _random(5, n=9, m=2, s=2)
    theta, _ = dea.envelopment(X, Y, X, Y, "VRS")
    for o in range(9):
        lp = dea.envelopment_program(X, Y, o, "VRS")
        assert linprog.solve(lp).objective_value == pytest.approx(theta[o], abs=1e-9)
        assert dea_lp_scipy(X, Y, o, "VRS") == pytest.approx(theta[o], abs=1e-8)


def test_undominated_keeps_frontier():
    X = np.array([[1.0], [1.0], [2.0]])
    Y = np.array([[2.0], [1.0], [2.0]])
    assert list(dea.undominated(X, Y)) == [0]


def test_radial_scores_fields():
    X, Y = _random(11, n=8, m=2, s=1)
    panel = _panel(X, Y)
    est = dea.radial_scores(panel, FrontierSpec.for_panel(panel))
    for e in est:
        assert e.te_farrell >= 1.0
        assert e.te == pytest.approx(1 / e.te_farrell)
        assert sum(e.reference_weights.values()) == pytest.approx(1.0, abs=1e-9)
    assert any(e.efficient for e in est)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.01, 100), st.floats(0.01, 100))
def test_units_invariance(seed, kx, ky):
    X, Y = _random(seed)
    for rts in ("VRS", "CRS"):
        a, _ = dea.envelopment(X, Y, X, Y, rts)
        b, _ = dea.envelopment(X * kx, Y * ky, X * kx, Y * ky, rts)
        assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.abs(a).max())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_frontier_monotone_under_addition(seed):
    X, Y = _random(seed)
    r = np.random.default_rng(seed + 1)
    Xn, Yn = np.vstack([X, r.uniform(1, 10, X.shape[1])]), np.vstack([Y, r.uniform(1, 10, Y.shape[1])])
    for rts in ("VRS", "CRS"):
        before, _ = dea.envelopment(X, Y, X, Y, rts)
        after, _ = dea.envelopment(X, Y, Xn, Yn, rts)
        assert (after >= before - 1e-9).all()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_vrs_dominates_crs_and_has_efficient_unit(seed):
    X, Y = _random(seed)
    vrs, _ = dea.envelopment(X, Y, X, Y, "VRS")
    crs, _ = dea.envelopment(X, Y, X, Y, "CRS")
    assert (1 / vrs >= 1 / crs - 1e-9).all()
    assert (np.abs(vrs - 1) < dea.EFFICIENT_TOL).any()


# --- bootstrap ---------------------------------------------------------------------------------

def test_silverman_bandwidth_formula():
    x = np.array([1.0, 1.2, 1.5, 2.0, 2.4, 3.1, 3.3, 4.0])
    sd = x.std(ddof=1)
    q1, q3 = np.percentile(x, [25, 75])
    assert dea.silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, (q3 - q1) / 1.349) * 8 ** -0.2)
    ties = np.array([1.0] * 10 + [1.5, 2.0])
    assert dea.silverman_bandwidth(ties) == pytest.approx(0.9 * ties.std(ddof=1) * 12 ** -0.2)


def test_smoothed_draw_is_at_least_one():
    r = np.random.default_rng(0)
    theta = 1 + r.exponential(0.3, 200)
    h = dea.silverman_bandwidth(np.concatenate([theta, 2 - theta]))
    for b in range(20):
        assert (dea.smoothed_draw(theta, h, np.random.default_rng(b)) >= 1.0).all()


def test_bootstrap_performance():
    out = dea.bootstrap_performance([0.1, 0.0, 0.2], [0.01, 0.0, 0.0])
    assert out[0] == pytest.approx(3.0)
    assert out[1] == 0.0 and out[2] == np.inf
    with pytest.raises(ValueError):
        dea.bootstrap_performance([0.1], [-1.0])


def _cobb_douglas(seed, n=40):
    r = np.random.default_rng(seed)
    x = r.uniform(1, 10, (n, 2))
    y = (x[:, 0] ** 0.3 * x[:, 1] ** 0.3 * np.exp(-r.exponential(0.2, n)))[:, None]
    return _panel(x, y)


def test_bootstrap_outputs_consistent():
    panel = _cobb_douglas(1)
    spec = FrontierSpec.for_panel(panel)
    est, diag, draws = dea.smoothed_bootstrap(panel, spec, reps=200, seed=3, return_draws=True)
    assert draws.shape == (200, panel.n)
    assert diag.bandwidth > 0 and diag.performance.shape == (panel.n,)
    for i, e in enumerate(est):
        assert e.ci_low <= e.ci_high
        assert e.bias == pytest.approx(e.te - e.tebc)
        theta_bc = 2 * e.te_farrell - draws[:, i].mean()
        assert e.tebc == pytest.approx(1 / theta_bc, rel=1e-12)
        # basic interval on the Farrell scale, inverted
        lo, hi = np.quantile(draws[:, i] - e.te_farrell, [0.025, 0.975])
        assert e.ci_low == pytest.approx(1 / (e.te_farrell - lo), rel=1e-12)
        assert e.ci_high == pytest.approx(1 / (e.te_farrell - hi), rel=1e-12)


def test_bootstrap_deterministic_across_jobs():
    panel = _cobb_douglas(2)
    spec = FrontierSpec.for_panel(panel)
    _, _, a = dea.smoothed_bootstrap(panel, spec, reps=120, seed=9, jobs=1, return_draws=True)
    _, _, b = dea.smoothed_bootstrap(panel, spec, reps=120, seed=9, jobs=3, return_draws=True)
    assert np.array_equal(a, b)
    _, _, c = dea.smoothed_bootstrap(panel, spec, reps=120, seed=10, jobs=1, return_draws=True)
    assert not np.array_equal(a, c)


def test_bootstrap_degenerate_sample_warns(caplog):
    X = np.ones((5, 1))
    Y = np.ones((5, 1))
    panel = _panel(X, Y)
    with caplog.at_level(logging.WARNING):
        est, diag = dea.smoothed_bootstrap(panel, FrontierSpec.for_panel(panel), reps=100)
    assert diag.skipped
    assert all(e.tebc == e.te == 1.0 for e in est)
    assert "degenerate" in caplog.text


def test_bootstrap_argument_checks():
    panel = _cobb_douglas(3, n=10)
    spec = FrontierSpec.for_panel(panel)
    with pytest.raises(ValueError):
        dea.smoothed_bootstrap(panel, spec, reps=50)
    with pytest.raises(ValueError):
        dea.smoothed_bootstrap(panel, spec, reps=100, level=1.5)
    with pytest.raises(ValueError):
        dea.smoothed_bootstrap(panel, spec, reps=100, ci_method="bca")


def test_percentile_interval_option():
    panel = _cobb_douglas(4)
    est, diag = dea.smoothed_bootstrap(panel, FrontierSpec.for_panel(panel), reps=100, ci_method="percentile")
    assert diag.ci_method == "percentile"
    assert all(e.ci_low <= e.ci_high for e in est)


def test_rts_test_statistic_and_pvalue_range():
    panel = _cobb_douglas(5, n=30)
    res = dea.rts_test(panel, reps=100, seed=1)
    assert res.statistic >= 1.0  # Farrell CRS score over VRS score, averaged
    assert 0 <= res.p_value <= 1
    assert res.bootstrap_statistics.shape == (100,)
    assert res.reject_crs == (res.p_value < res.level)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog as scipy_linprog

from deaiml.linprog import LinearProgram, WarmBatch, solve, solve_batch


def _scipy(lp: LinearProgram):
    c = -lp.objective if lp.sense == "maximize" else lp.objective
    ub = [i for i, r in enumerate(lp.relations) if r != "="]
    sign = np.array([1.0 if lp.relations[i] == "<=" else -1.0 for i in ub])
    eq = [i for i, r in enumerate(lp.relations) if r == "="]
    bounds = [(None if lo == -np.inf else lo, None if up == np.inf else up) for lo, up in zip(lp.lower, lp.upper)]
    res = scipy_linprog(c, A_ub=lp.A[ub] * sign[:, None] if ub else None, b_ub=lp.rhs[ub] * sign if ub else None,
                        A_eq=lp.A[eq] if eq else None, b_eq=lp.rhs[eq] if eq else None, bounds=bounds,
                        method="highs")
    return res


def test_textbook_maximum():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
    lp = LinearProgram.from_rows("maximize", [3, 5], [([1, 0], "<=", 4), ([0, 2], "<=", 12), ([3, 2], "<=", 18)])
    sol = solve(lp)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(36.0, abs=1e-12)
    np.testing.assert_allclose(sol.primal, [2, 6], atol=1e-12)
    # complementary slackness: the first constraint is slack, so its dual is zero
    assert sol.duals[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(sol.duals @ lp.rhs, 36.0, atol=1e-9)


def test_infeasible_and_unbounded():
    infeasible = LinearProgram.from_rows("maximize", [1, 1], [([1, 1], "<=", 1), ([1, 1], ">=", 2)])
    assert solve(infeasible).status == "infeasible"
    unbounded = LinearProgram.from_rows("maximize", [1, 0], [([0, 1], "<=", 1)])
    assert solve(unbounded).status == "unbounded"


def test_free_and_bounded_variables():
    # min x + y with x free, x >= -3 via a row, y in [1, 2]
    lp = LinearProgram.from_rows("minimize", [1, 1], [([1, 0], ">=", -3)], lower=[-np.inf, 1], upper=[np.inf, 2])
    sol = solve(lp)
    assert sol.objective_value == pytest.approx(-2.0, abs=1e-12)
    np.testing.assert_allclose(sol.primal, [-3, 1], atol=1e-12)


def test_degenerate_program_terminates():
    # classic cycling example for the largest-coefficient rule; Bland's rule must terminate
    lp = LinearProgram.from_rows(
        "maximize", [10, -57, -9, -24],
        [([0.5, -5.5, -2.5, 9], "<=", 0), ([0.5, -1.5, -0.5, 1], "<=", 0), ([1, 0, 0, 0], "<=", 1)])
    sol = solve(lp)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(1.0, abs=1e-12)


def test_malformed_input_raises():
    with pytest.raises(ValueError):
        LinearProgram("maximize", [1, 2], [[1, 2]], ["<="], [1, 2])
    with pytest.raises(ValueError):
        LinearProgram("maximise", [1], [[1]], ["<="], [1])
    with pytest.raises(ValueError):
        LinearProgram("maximize", [1], [[1]], ["<>"], [1])
    with pytest.raises(ValueError):
        LinearProgram("maximize", [np.nan], [[1]], ["<="], [1])


def test_lp_text_roundtrip_shape():
    lp = LinearProgram.from_rows("minimize", [1, -2], [([1, 1], ">=", 1), ([1, -1], "=", 0)],
                                 lower=[-np.inf, 0], upper=[np.inf, 3])
    text = lp.to_lp_text("demo")
    assert text.splitlines()[1] == "Minimize"
    assert " c1: 1 x0 - 1 x1 = 0" in text
    assert " x0 free" in text and " 0 <= x1 <= 3" in text
    assert text.rstrip().endswith("End")


@st.composite
def random_programs(draw):
    seed = draw(st.integers(0, 2 ** 31 - 1))
    r = np.random.default_rng(seed)
    v = int(r.integers(1, 6))
    k = int(r.integers(1, 6))
    A = np.round(r.uniform(-5, 5, (k, v)), 1)
    rel = list(r.choice(["<=", ">=", "="], size=k, p=[0.5, 0.3, 0.2]))
    rhs = np.round(r.uniform(-5, 5, k), 1)
    sense = "maximize" if r.random() < 0.5 else "minimize"
    c = np.round(r.uniform(-3, 3, v), 1)
    # a box keeps most programs bounded while still exercising the unbounded path sometimes
    upper = np.where(r.random(v) < 0.7, 10.0, np.inf)
    return LinearProgram(sense, c, A, rel, rhs, upper=upper)


@settings(max_examples=300, deadline=None)
@given(random_programs())
def test_matches_external_solver(lp):
    ours = solve(lp)
    ref = _scipy(lp)
    expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
    assert ours.status == expected
    if expected == "optimal":
        ref_obj = -ref.fun if lp.sense == "maximize" else ref.fun
        assert ours.objective_value == pytest.approx(ref_obj, abs=1e-7, rel=1e-9)
        assert np.all(lp.residuals(ours.primal) <= 1e-7)


def test_batch_is_bitwise_identical_to_single_solves():
    r = np.random.default_rng(7)
    B, k, v = 40, 4, 6
    A = r.uniform(0.5, 3, (B, k, v))
    rel = ["<=", "<=", ">=", "="]
    rhs = r.uniform(1, 5, (B, k))
    c = r.uniform(-1, 2, v)
    batch = solve_batch("maximize", c, A, rel, rhs)
    for b in range(B):
        one = solve(LinearProgram("maximize", c, A[b], rel, rhs[b]))
        assert batch.status[b] == one.status
        if one.optimal:
            assert batch.objective_value[b] == one.objective_value
            assert np.array_equal(batch.primal[b], one.primal)
            assert batch.iterations[b] == one.iterations


def test_warm_batch_column_generation_reaches_full_optimum():
    r = np.random.default_rng(3)
    B, k, n = 12, 3, 15
    full = r.uniform(0.5, 3.0, (B, k, n))
    rhs = r.uniform(5, 10, (B, k))
    c = r.uniform(0.1, 2.0, n)
    rel = ["<="] * k
    wb = WarmBatch(c[:2], full[:, :, :2], rel, rhs)
    # add the remaining columns in two rounds, only to some programs at first
    rows = np.arange(0, B, 2)
    wb.add_columns(rows, full[rows, :, 2:8], cost=np.broadcast_to(c[2:8], (rows.size, 6)))
    wb.add_columns(np.arange(B), full[:, :, 8:], cost=np.broadcast_to(c[8:], (B, n - 8)))
    # odd programs still lack columns 2..7; give them now
    odd = np.arange(1, B, 2)
    wb.add_columns(odd, full[odd, :, 2:8], cost=np.broadcast_to(c[2:8], (odd.size, 6)))
    ref = solve_batch("maximize", c, full, rel, rhs)
    np.testing.assert_allclose(wb.objective_value, ref.objective_value, rtol=1e-10, atol=1e-10)
    # duals certify optimality: every column prices out nonnegatively
    y = wb.duals
    reduced = np.einsum("bk,bkn->bn", y, full) - c
    assert (reduced > -1e-9).all()

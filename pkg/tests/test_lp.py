import numpy as np
import pytest

from helpers import random_bounded_lp, vertex_minimum

from lotdesign.lp import (
    EQ,
    GE,
    TOL_DUAL,
    TOL_FEAS,
    TOL_GAP,
    LinearProgram,
    LpStatus,
    dual_objective,
    reduced_cost_of_column,
    solve_lp,
)


def check_optimal(lp, sol):
    A = lp.matrix.toarray()
    act = A @ sol.primal
    assert np.all(sol.primal >= -TOL_FEAS)
    for i, s in enumerate(lp.senses):
        if s == GE:
            assert act[i] >= lp.rhs[i] - TOL_FEAS * (1 + abs(lp.rhs[i]))
            assert sol.dual[i] >= -TOL_DUAL
        else:
            assert abs(act[i] - lp.rhs[i]) <= TOL_FEAS * (1 + abs(lp.rhs[i]))
    rc = lp.costs - A.T @ sol.dual
    assert np.all(rc >= -TOL_DUAL)
    assert abs(sol.objective - dual_objective(lp, sol)) <= TOL_GAP * (1 + abs(sol.objective))
    return rc


def test_single_variable_duality():
    lp = LinearProgram.from_rows([1.0], [({0: 1.0}, GE, 3.0)])
    sol = solve_lp(lp)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(3.0)
    assert sol.dual[0] == pytest.approx(1.0)
    assert reduced_cost_of_column(lp, sol, 2.0, {0: 1.0}) == pytest.approx(1.0)


def test_contradiction_is_infeasible():
    lp = LinearProgram.from_rows([0.0], [({0: -1.0}, GE, 1.0)])
    sol = solve_lp(lp)
    assert sol.status is LpStatus.INFEASIBLE
    # the duals form a Farkas ray
    assert sol.dual @ lp.rhs > 0
    assert np.all(lp.matrix.toarray().T @ sol.dual <= 1e-9)


def test_unbounded():
    lp = LinearProgram.from_rows([-1.0, 0.0], [({0: 1.0, 1: -1.0}, GE, 0.0)])
    assert solve_lp(lp).status is LpStatus.UNBOUNDED


def test_matches_vertex_enumeration():
    rng = np.random.default_rng(0)
    seen = {LpStatus.OPTIMAL: 0, LpStatus.INFEASIBLE: 0}
    for _ in range(60):
        lp = random_bounded_lp(rng)
        sol = solve_lp(lp)
        best = vertex_minimum(lp)
        if best is None:
            assert sol.status is LpStatus.INFEASIBLE
        else:
            assert sol.status is LpStatus.OPTIMAL
            assert sol.objective == pytest.approx(best, abs=TOL_GAP * (1 + abs(best)))
            check_optimal(lp, sol)
        seen[sol.status] += 1
    assert seen[LpStatus.OPTIMAL] > 10 and seen[LpStatus.INFEASIBLE] > 0


def test_basic_columns_have_zero_reduced_cost():
    rng = np.random.default_rng(1)
    for _ in range(30):
        lp = random_bounded_lp(rng, n=6, m=4)
        sol = solve_lp(lp)
        if not sol.optimal:
            continue
        A = lp.matrix.toarray()
        basic = [key[1] for key in sol.basis.keys if key[0] == "col"]
        for j in basic:
            col = {i: A[i, j] for i in range(lp.num_rows) if A[i, j] != 0}
            assert abs(reduced_cost_of_column(lp, sol, lp.costs[j], col)) <= TOL_DUAL


def test_duplicate_column_reduced_cost():
    rng = np.random.default_rng(4)
    lp = random_bounded_lp(rng, n=5, m=3)
    while not solve_lp(lp).optimal:
        lp = random_bounded_lp(rng, n=5, m=3)
    sol = solve_lp(lp)
    A = lp.matrix.toarray()
    rc = lp.costs - A.T @ sol.dual
    for j in range(lp.num_cols):
        col = {i: A[i, j] for i in range(lp.num_rows)}
        assert reduced_cost_of_column(lp, sol, lp.costs[j], col) == pytest.approx(rc[j], abs=TOL_DUAL)


def append_column(lp, cost, col):
    A = lp.matrix.toarray()
    extra = np.array([[col.get(i, 0.0)] for i in range(lp.num_rows)])
    rows = [
        ({j: v for j, v in enumerate(np.hstack([A, extra])[i]) if v}, lp.senses[i], lp.rhs[i])
        for i in range(lp.num_rows)
    ]
    return LinearProgram.from_rows(list(lp.costs) + [cost], rows)


def test_nonnegative_rc_column_keeps_objective():
    rng = np.random.default_rng(9)
    done = 0
    while done < 20:
        lp = random_bounded_lp(rng)
        sol = solve_lp(lp)
        if not sol.optimal:
            continue
        col = {i: float(rng.integers(-2, 3)) for i in range(lp.num_rows)}
        cost = max(0.0, sum(a * sol.dual[i] for i, a in col.items())) + float(rng.integers(0, 3))
        assert reduced_cost_of_column(lp, sol, cost, col) >= -1e-9
        again = solve_lp(append_column(lp, cost, col), warm_start=sol.basis)
        assert again.objective == pytest.approx(sol.objective, abs=TOL_GAP * (1 + abs(sol.objective)))
        done += 1


def test_satisfied_row_does_not_raise_objective():
    rng = np.random.default_rng(12)
    done = 0
    while done < 20:
        lp = random_bounded_lp(rng)
        sol = solve_lp(lp)
        if not sol.optimal:
            continue
        coefs = {j: float(rng.integers(-2, 3)) for j in range(lp.num_cols)}
        rhs = float(np.floor(sum(a * sol.primal[j] for j, a in coefs.items())))
        A = lp.matrix.toarray()
        rows = [({j: v for j, v in enumerate(A[i]) if v}, lp.senses[i], lp.rhs[i]) for i in range(lp.num_rows)]
        bigger = LinearProgram.from_rows(lp.costs, rows + [(coefs, GE, rhs)])
        for warm in (None, sol.basis):
            again = solve_lp(bigger, warm_start=warm)
            assert again.status is LpStatus.OPTIMAL
            assert again.objective <= sol.objective + TOL_GAP * (1 + abs(sol.objective))
        done += 1


def test_warm_start_after_cut_matches_cold():
    rng = np.random.default_rng(21)
    done = 0
    while done < 25:
        lp = random_bounded_lp(rng, n=7, m=4)
        sol = solve_lp(lp)
        if not sol.optimal:
            continue
        A = lp.matrix.toarray()
        rows = [({j: v for j, v in enumerate(A[i]) if v}, lp.senses[i], lp.rhs[i]) for i in range(lp.num_rows)]
        cut = ({j: float(rng.integers(0, 3)) for j in range(lp.num_cols)}, GE, float(rng.integers(1, 6)))
        bigger = LinearProgram.from_rows(lp.costs, rows + [cut])
        warm, cold = solve_lp(bigger, warm_start=sol.basis), solve_lp(bigger)
        assert warm.status is cold.status
        if cold.optimal:
            assert warm.objective == pytest.approx(cold.objective, abs=TOL_GAP * (1 + abs(cold.objective)))
            check_optimal(bigger, warm)
        done += 1


def test_deterministic():
    lp = random_bounded_lp(np.random.default_rng(3), n=8, m=6)
    a, b = solve_lp(lp), solve_lp(lp)
    assert a.status is b.status and a.iterations == b.iterations
    assert np.array_equal(a.primal, b.primal) and np.array_equal(a.dual, b.dual)


def test_malformed_programs_rejected():
    with pytest.raises(ValueError):
        LinearProgram.from_rows([1.0], [({1: 1.0}, GE, 1.0)])
    with pytest.raises(ValueError):
        LinearProgram.from_rows([1.0], [({0: 1.0}, "<=", 1.0)])
    with pytest.raises(ValueError):
        LinearProgram.from_rows([float("nan")], [({0: 1.0}, GE, 1.0)])


def test_equality_rows_have_free_duals():
    # min x0 + 3 x1  s.t.  x0 + x1 = 2,  x0 - x1 >= -4
    lp = LinearProgram.from_rows([1.0, 3.0], [({0: 1.0, 1: 1.0}, EQ, 2.0), ({0: 1.0, 1: -1.0}, GE, -4.0)])
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(2.0)
    check_optimal(lp, sol)

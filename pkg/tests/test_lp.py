import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ontoscope.errors import NumericalBreakdown
from ontoscope.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, lp_solve
from oracles import min_overlap, vertex_optimum


def random_box_lp(rng, integer=True):
    n = int(rng.integers(1, 7))
    m_ub = int(rng.integers(0, 5))
    m_eq = int(rng.integers(0, min(n, 3)))
    draw = (lambda *s: rng.integers(-3, 4, size=s).astype(float)) if integer else \
        (lambda *s: rng.normal(size=s))
    c = draw(n)
    A_ub, b_ub = draw(m_ub, n), draw(m_ub) + 2
    A_eq, b_eq = draw(m_eq, n), draw(m_eq)
    lo = -rng.integers(0, 3, size=n).astype(float)
    hi = rng.integers(1, 4, size=n).astype(float)
    return c, A_ub, b_ub, A_eq, b_eq, lo, hi


def solve_box(c, A_ub, b_ub, A_eq, b_eq, lo, hi, presolve=True):
    lp = LinearProgram.build(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub,
                             bounds=np.column_stack([lo, hi]).tolist())
    return lp, lp_solve(lp, presolve=presolve)


@pytest.mark.parametrize("seed", range(150))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    c, A_ub, b_ub, A_eq, b_eq, lo, hi = random_box_lp(rng, integer=seed % 2 == 0)
    lp, sol = solve_box(c, A_ub, b_ub, A_eq, b_eq, lo, hi)
    best, _ = vertex_optimum(c, A_ub, b_ub, A_eq, b_eq, lo, hi)
    if best is None:
        assert sol.status == INFEASIBLE
        y, A, b = sol.farkas
        assert (A.T @ y).min() >= -1e-9 and b @ y < 0
    else:
        assert sol.status == OPTIMAL
        assert abs(sol.value - best) <= 1e-7
        assert max(lp.residuals(sol.x).values()) <= 1e-7


@given(st.integers(0, 10**6))
def test_presolve_does_not_change_answer(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    # nonnegative rows with zero right-hand side trigger the presolve
    A_eq = rng.integers(-2, 3, size=(3, n)).astype(float)
    A_eq[0] = np.abs(A_eq[0])
    b_eq = np.array([0.0, *rng.integers(-2, 3, size=2)])
    c = rng.normal(size=n)
    A_ub, b_ub = np.ones((1, n)), np.array([5.0])
    lp = LinearProgram.build(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
    a, b = lp_solve(lp, presolve=True), lp_solve(lp, presolve=False)
    assert a.status == b.status
    if a.status == OPTIMAL:
        assert abs(a.value - b.value) <= 1e-7


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6), st.integers(0, 10**6))
def test_min_overlap_lp(raw, seed):
    rng = np.random.default_rng(seed)
    p = np.array(raw) + 1e-3
    p /= p.sum()
    q = rng.dirichlet(np.ones(len(p)))
    L = len(p)
    # max sum t subject to t <= p, t <= q, 0 <= t <= 1
    A_ub = np.vstack([np.eye(L), np.eye(L)])
    b_ub = np.concatenate([p, q])
    sol = lp_solve(LinearProgram.build(np.ones(L), A_ub=A_ub, b_ub=b_ub))
    best, _ = vertex_optimum(np.ones(L), A_ub, b_ub, lo=np.zeros(L), hi=np.ones(L))
    assert sol.status == OPTIMAL
    assert abs(sol.value - best) <= 1e-7
    assert abs(sol.value - min_overlap(p, q)) <= 1e-7


def test_unbounded_ray():
    lp = LinearProgram.build([1.0, 1.0], A_ub=[[1.0, -1.0]], b_ub=[1.0])
    sol = lp_solve(lp)
    assert sol.status == UNBOUNDED
    assert lp.objective @ sol.ray > 0
    assert (lp.A_ub @ sol.ray <= 1e-9).all() and (sol.ray >= -1e-12).all()


def test_infeasible_certificate():
    lp = LinearProgram.build([1.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[-1.0])
    sol = lp_solve(lp)
    assert sol.status == INFEASIBLE
    y, A, b = sol.farkas
    assert (A.T @ y >= -1e-12).all() and b @ y < 0


def test_free_variables_and_duals():
    # max x - y with x free, y free, x - y <= 3, x + y = 1
    lp = LinearProgram.build([1.0, -1.0], A_eq=[[1.0, 1.0]], b_eq=[1.0], A_ub=[[1.0, -1.0]], b_ub=[3.0],
                             bounds=(None, None))
    sol = lp_solve(lp)
    assert sol.status == OPTIMAL and abs(sol.value - 3.0) < 1e-9
    # strong duality for the equality / inequality multipliers
    assert abs(sol.dual_eq @ lp.b_eq + sol.dual_ub @ lp.b_ub - sol.value) < 1e-9


def test_bad_input_rejected():
    with pytest.raises(ValueError):
        LinearProgram.build([1.0, np.nan])
    with pytest.raises(ValueError):
        LinearProgram.build([1.0], bounds=(2.0, 1.0))


def test_pivot_budget_reports_breakdown():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(8, 12))
    lp = LinearProgram.build(rng.normal(size=12), A_ub=A, b_ub=np.ones(8) * 3, bounds=(0, 1))
    with pytest.raises(NumericalBreakdown):
        lp_solve(lp, max_pivots=1)


@given(st.integers(0, 10**6))
def test_redundant_equality_rows(seed):
    # stacking random combinations of the rows must not change the optimum
    rng = np.random.default_rng(seed)
    m, k = 4, 9
    A = rng.integers(-3, 4, size=(m, k)).astype(float)
    b = A @ rng.dirichlet(np.ones(k))
    c = rng.normal(size=k)
    base = lp_solve(LinearProgram.build(c, A_eq=A, b_eq=b, bounds=(0, 1)))
    mix = rng.integers(-2, 3, size=(5, m)).astype(float)
    order = rng.permutation(m + 5)
    A2, b2 = np.vstack([A, mix @ A])[order], np.concatenate([b, mix @ b])[order]
    sol = lp_solve(LinearProgram.build(c, A_eq=A2, b_eq=b2, bounds=(0, 1)))
    assert base.status == sol.status == OPTIMAL
    assert abs(sol.value - base.value) <= 1e-8 * (1 + abs(base.value))

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ontoscope.definetti import (
    BoundInputs,
    best_iid_mixture,
    bound_rows,
    ct_bound,
    iid_power,
    simplex_grid,
    theorem3_bound,
)
from ontoscope.errors import DomainError, IllDefinedMarginal, NotSymmetric
from ontoscope.lp import LinearProgram, lp_solve
from ontoscope.ontology import (
    TOY_SPACE,
    CondDist,
    OnticSpace,
    conditional_distance,
    marginal_sites,
    product_dist,
    single_site,
    symmetrize,
    toy_extension,
    toy_responses,
)
from ontoscope.optimize import max_overlap_symmetric
from ontoscope.quantum import reference_table


def test_bound_values():
    assert ct_bound(BoundInputs(16, 2, 2, 3)) == 0.25
    assert theorem3_bound(16, 2, 3) == 0.25
    assert ct_bound(BoundInputs(4, 2, 2, 3)) == 1.0
    assert [theorem3_bound(n, 2, 3) for n in (4, 8, 12, 16)] == [1.0, 0.5, float(Fraction(1, 3)), 0.25]


def test_bounds_non_increasing():
    ct = [ct_bound(BoundInputs(n, 2, 2, 3)) for n in range(4, 65)]
    t3 = [theorem3_bound(n, 2, 3) for n in range(4, 65)]
    assert all(x >= y for x, y in zip(ct, ct[1:]))
    assert all(x >= y for x, y in zip(t3, t3[1:]))


@given(st.integers(2, 10**4), st.integers(1, 50), st.integers(1, 50))
def test_two_preparation_agreement(n, m, L):
    m = min(m, n - 1)
    assert abs(ct_bound(BoundInputs(n, m, 2, L)) - theorem3_bound(n, m, L)) <= 1e-15


@given(st.integers(2, 500), st.integers(1, 20), st.integers(1, 4), st.integers(1, 6))
def test_bound_formula(n, m, P, L):
    m = min(m, n - 1)
    expected = min(2 * m * P * L**P / n, P * m * (m - 1) / n)
    assert math.isclose(ct_bound(BoundInputs(n, m, P, L)), expected, rel_tol=1e-15)


def test_bound_inputs_checked():
    for args in [(4, 4, 2, 3), (4, 0, 2, 3), (4, 2, 0, 3), (4.5, 2, 2, 3), (4, True, 2, 3)]:
        with pytest.raises(DomainError):
            BoundInputs(*args)


def test_bound_rows():
    rows = bound_rows([4, 16], 2, 3)
    assert rows == [(4, 2, 3, 1.0, 1.0, None), (16, 2, 3, 0.25, 0.25, None)]
    assert bound_rows([8], 2, 3, p_count=3)[0][4] is None


@pytest.mark.parametrize("size,den", [(2, 5), (3, 4), (3, 16), (4, 3)])
def test_simplex_grid(size, den):
    g = simplex_grid(size, den)
    assert len(g) == math.comb(den + size - 1, size - 1)
    assert np.allclose(g.sum(axis=1), 1.0)
    assert len({tuple(r) for r in g}) == len(g)


# --- mixture witness -----------------------------------------------------------------

@pytest.fixture(scope="module")
def toy_witnesses():
    sigma = toy_extension(4)
    return {g: best_iid_mixture(sigma, 2, grid_resolution=g) for g in (8, 16, 32)}


def test_toy_extension_distance_within_bound(toy_witnesses):
    w = toy_witnesses[16]
    assert w.achieved_distance <= ct_bound(BoundInputs(4, 2, 2, 3))
    assert w.achieved_distance == pytest.approx(1 / 6, abs=1e-9)


def test_grid_refinement_monotone(toy_witnesses):
    d = [toy_witnesses[g].achieved_distance for g in (8, 16, 32)]
    assert d[0] >= d[1] - 1e-12 >= d[2] - 2e-12


def test_reported_distance_is_recomputable(toy_witnesses):
    w = toy_witnesses[16]
    target = marginal_sites(toy_extension(4), (0, 1)).table
    assert abs(conditional_distance(w.table(), target, 2) - w.achieved_distance) <= 1e-12
    assert sum(wt for wt, _ in w.components) == pytest.approx(1.0)


def test_iid_input_recovered_exactly():
    single = single_site(TOY_SPACE, {"psi": [0.5, 0.25, 0.25], "phi": [0.0, 0.75, 0.25]})
    sigma = iid_power(single, 3)
    w = best_iid_mixture(sigma, 2, grid_resolution=4)
    assert w.achieved_distance <= 1e-9


@given(st.integers(0, 10**6))
def test_mixture_of_grid_products_recovered(seed):
    rng = np.random.default_rng(seed)
    grid = simplex_grid(2, 4)
    space = OnticSpace.of_size(2)
    comps = [single_site(space, {"a": grid[rng.integers(len(grid))], "b": grid[rng.integers(len(grid))]})
             for _ in range(2)]
    weights = rng.dirichlet(np.ones(2))
    table = sum(w * iid_power(c, 3).table for w, c in zip(weights, comps))
    sigma = CondDist(space, (("a", "b"),) * 3, table)
    assert best_iid_mixture(sigma, 2, grid_resolution=4).achieved_distance <= 1e-8


def test_rejects_non_symmetric_and_signalling():
    lopsided = product_dist(single_site(TOY_SPACE, {"psi": [1, 0, 0], "phi": [0, 1, 0]}),
                            single_site(TOY_SPACE, {"psi": [0, 0, 1], "phi": [0, 1, 0]}))
    with pytest.raises(NotSymmetric):
        best_iid_mixture(lopsided, 1)
    t = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            t[a, b, b, a] = 1.0
    signalling = symmetrize(CondDist(OnticSpace.of_size(2), (("a", "b"),) * 2, t))
    with pytest.raises(IllDefinedMarginal):
        best_iid_mixture(signalling, 1)
    with pytest.raises(DomainError):
        best_iid_mixture(toy_extension(4), 4)


def test_column_generation_matches_full_lp():
    # every grid component enters the LP at once; no pricing involved
    sigma = toy_extension(4)
    target = marginal_sites(sigma, (0, 1)).table.ravel()
    grid = simplex_grid(3, 4)
    cols = []
    for i in range(len(grid)):
        for j in range(len(grid)):
            single = single_site(TOY_SPACE, {"psi": grid[i], "phi": grid[j]})
            cols.append(iid_power(single, 2).table.ravel())
    Q = np.array(cols).T  # (cells, components)
    cells, k = Q.shape
    per_ctx = cells // 4
    nv = k + cells + 1
    A_ub = np.zeros((2 * cells + 4, nv))
    A_ub[:cells, :k], A_ub[:cells, k:k + cells] = Q, -np.eye(cells)
    A_ub[cells:2 * cells, :k], A_ub[cells:2 * cells, k:k + cells] = -Q, -np.eye(cells)
    for p in range(4):
        A_ub[2 * cells + p, k + p * per_ctx:k + (p + 1) * per_ctx] = 1.0
        A_ub[2 * cells + p, -1] = -2.0
    b_ub = np.concatenate([target, -target, np.zeros(4)])
    A_eq = np.zeros((1, nv))
    A_eq[0, :k] = 1.0
    c = np.zeros(nv)
    c[-1] = -1.0
    sol = lp_solve(LinearProgram.build(c, A_eq=A_eq, b_eq=[1.0], A_ub=A_ub, b_ub=b_ub))
    assert abs(-sol.value - best_iid_mixture(sigma, 2, grid_resolution=4).achieved_distance) <= 1e-9


def test_toy_distance_below_symmetric_lp_value(toy_witnesses):
    omega = max_overlap_symmetric(4, 2, reference_table(), toy_responses(), TOY_SPACE).omega_star
    assert toy_witnesses[16].achieved_distance <= omega

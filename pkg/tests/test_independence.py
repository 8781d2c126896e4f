import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ontoscope.errors import SearchSpaceTooLarge, ShapeMismatch
from ontoscope.independence import (
    CCWitness,
    check_preparation_independence,
    check_subsystem_condition,
    find_cc_witness,
    toy_witness,
    trivial_witness,
    verify_cc_witness,
)
from ontoscope.ontology import CondDist, OnticSpace, product_dist, single_site, toy_extension, toy_joint

PREPS = ("a", "b")


def random_witness(rng, C, L, n=2):
    weight = rng.dirichlet(np.ones(C))
    locs = tuple(rng.dirichlet(np.ones(L), size=(2, C)) for _ in range(n))
    return CCWitness(tuple(f"c{k}" for k in range(C)), weight, locs)


def dist_of(w, L):
    return CondDist(OnticSpace.of_size(L), (PREPS,) * w.n, w.reconstruct())


# --- toy model triple ---------------------------------------------------------

def test_toy_fails_preparation_independence_at_gap_cell():
    v = check_preparation_independence(toy_joint())
    assert not v.holds
    assert v.max_violation == pytest.approx(0.25)
    assert v.witness_context["ontic"] == ("l3", "l3")
    assert v.witness_context["joint"] == 0.0


def test_toy_satisfies_subsystem_condition():
    v = check_subsystem_condition(toy_joint())
    assert v.holds and v.max_violation <= 1e-12


def test_toy_witness_verifies():
    v = verify_cc_witness(toy_joint(), toy_witness())
    assert v.holds
    assert v.details["residual"] <= 1e-12
    assert len(toy_witness().common_past) == 2


def test_witness_search_finds_toy_decomposition():
    w = find_cc_witness(toy_joint(), max_c=2)
    assert w is not None
    assert verify_cc_witness(toy_joint(), w).holds
    # a single common-past value cannot work since the behaviour is correlated
    assert find_cc_witness(toy_joint(), max_c=1) is None


@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(2, 3))
def test_search_recovers_deterministic_mixtures(seed, C, L):
    rng = np.random.default_rng(seed)
    locs = []
    for _ in range(2):
        loc = np.zeros((2, C, L))
        for p in range(2):
            for c in range(C):
                loc[p, c, rng.integers(L)] = 1.0
        locs.append(loc)
    w = CCWitness(tuple(f"c{k}" for k in range(C)), rng.dirichlet(np.ones(C)), tuple(locs))
    d = dist_of(w, L)
    found = find_cc_witness(d, max_c=C)
    assert found is not None
    assert len(found.common_past) <= C
    assert verify_cc_witness(d, found).holds


def test_search_limits():
    with pytest.raises(SearchSpaceTooLarge):
        find_cc_witness(toy_extension(4), max_c=2)
    with pytest.raises(SearchSpaceTooLarge):
        find_cc_witness(toy_joint(), max_c=4)
    with pytest.raises(SearchSpaceTooLarge):
        find_cc_witness(toy_joint(), max_c=2, deterministic_locals=False)


def test_stochastic_mode_on_product():
    s = single_site(OnticSpace.of_size(3), {"a": [0.2, 0.3, 0.5], "b": [0.6, 0.4, 0.0]})
    d = product_dist(s, s)
    w = find_cc_witness(d, max_c=1, deterministic_locals=False)
    assert w is not None and verify_cc_witness(d, w).holds
    assert find_cc_witness(toy_joint(), max_c=1, deterministic_locals=False) is None


def test_bad_witness_shapes():
    w = toy_witness()
    bad = CCWitness(w.common_past, w.weight, w.locals[:1])
    with pytest.raises(ShapeMismatch):
        verify_cc_witness(toy_joint(), bad)


def test_witness_residual_reported():
    w = toy_witness()
    skewed = CCWitness(w.common_past, np.array([0.6, 0.4]), w.locals)
    v = verify_cc_witness(toy_joint(), skewed)
    assert not v.holds and v.details["residual"] == pytest.approx(0.1)


# --- implication chain on random inputs -----------------------------------------

@given(st.integers(0, 10**6), st.integers(2, 3))
def test_product_implies_cc_implies_subsystem(seed, L):
    rng = np.random.default_rng(seed)
    space = OnticSpace.of_size(L)
    sites = [single_site(space, dict(zip(PREPS, rng.dirichlet(np.ones(L), size=2)))) for _ in range(2)]
    d = product_dist(*sites)
    assert check_preparation_independence(d).holds
    assert verify_cc_witness(d, trivial_witness(d)).holds
    assert check_subsystem_condition(d).holds


@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(2, 3))
def test_cc_mixture_satisfies_subsystem(seed, C, L):
    rng = np.random.default_rng(seed)
    w = random_witness(rng, C, L)
    d = dist_of(w, L)
    assert verify_cc_witness(d, w).holds
    assert check_subsystem_condition(d).holds


def test_signalling_violates_subsystem():
    t = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            t[a, b, b, a] = 1.0
    d = CondDist(OnticSpace.of_size(2), (PREPS, PREPS), t)
    v = check_subsystem_condition(d)
    assert not v.holds and v.max_violation == pytest.approx(1.0)

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ontoscope.errors import DimensionMismatch, DomainError, LabelMismatch, SubsystemOverflow, UnsupportedPair
from ontoscope.ontology import EmpiricalModel
from ontoscope.quantum import (
    Measurement,
    PureState,
    born_table,
    canonical_pair,
    is_conclusive_exclusion,
    min_subsystems,
    pbr_measurement,
    reference_table,
)


@pytest.fixture(scope="module")
def table():
    pair = canonical_pair(math.pi / 4)
    return born_table(pair, pbr_measurement(pair))


def test_table_matches_reference(table):
    assert table.max_difference(reference_table()) <= 1e-12


def test_reference_values():
    t = reference_table().table.reshape(4, 4)
    assert sorted(t[0]) == [0, 0.25, 0.25, 0.5]
    assert np.allclose(t.sum(axis=1), 1.0)


def test_rows_normalized(table):
    assert np.allclose(table.table.sum(axis=-1), 1.0, atol=1e-12)
    assert table.table.min() >= -1e-12


def test_exclusion_zeros(table):
    holds, bad = is_conclusive_exclusion(table)
    assert holds and bad == []
    assert abs(table.entry("not(psi.psi)", ("psi", "psi"))) <= 1e-12


def test_site_swap_symmetry(table):
    # swapping the two copies swaps (psi, phi) <-> (phi, psi) in rows and outcome labels
    swap_out = {o: "not(" + ".".join(reversed(o[4:-1].split("."))) + ")" for o in table.outcomes}
    for a, b in itertools.product(("psi", "phi"), repeat=2):
        for o in table.outcomes:
            assert abs(table.entry(o, (a, b)) - table.entry(swap_out[o], (b, a))) <= 1e-12


def test_measurement_is_projective():
    pair = canonical_pair(math.pi / 4)
    meas = pbr_measurement(pair)
    for e in meas.effects:
        assert np.allclose(e @ e, e, atol=1e-12)


@given(st.floats(0.05, math.pi / 2 - 0.05), st.floats(0, 2 * math.pi))
def test_born_rule_single_qubit(theta, phase):
    pair = canonical_pair(theta)
    basis = Measurement.from_basis(("0", "1"), [np.array([1, 0]), np.array([0, np.exp(1j * phase)])])
    assert abs(basis.probability("0", pair.phi) - math.cos(theta) ** 2) <= 1e-12
    assert abs(pair.overlap - math.cos(theta)) <= 1e-12


def test_unsupported_angle():
    with pytest.raises(UnsupportedPair):
        pbr_measurement(canonical_pair(math.pi / 3))


def test_bad_states():
    with pytest.raises(DimensionMismatch):
        PureState([1, 0, 0])
    with pytest.raises(DomainError):
        PureState([1, 1])
    with pytest.raises(DomainError):
        canonical_pair(0.0)


def test_bad_measurement():
    with pytest.raises(DomainError):
        Measurement(("a", "b"), [np.eye(2), np.eye(2)])
    with pytest.raises(LabelMismatch):
        Measurement(("a", "a"), [np.diag([1, 0]), np.diag([0, 1])])


def test_exclusion_needs_bijective_labels():
    t = EmpiricalModel((("psi", "phi"),), ("x", "y"), np.full((2, 2), 0.5))
    with pytest.raises(LabelMismatch):
        is_conclusive_exclusion(t)


def test_min_subsystems_values():
    assert min_subsystems(math.pi / 2) == 1
    assert min_subsystems(math.pi / 4) == 2
    # the count grows without bound as the states approach each other
    counts = [min_subsystems(t) for t in np.linspace(1.5, 0.05, 20)]
    assert counts == sorted(counts)
    with pytest.raises(SubsystemOverflow):
        min_subsystems(1e-9)
    with pytest.raises(DomainError):
        min_subsystems(2.0)


@given(st.floats(1e-4, math.pi / 2))
def test_min_subsystems_formula(theta):
    x = 1 / math.log2(math.tan(theta / 2) + 1)
    k = min_subsystems(theta)
    assert k >= x - 1e-9 and k - 1 < x + 1e-9

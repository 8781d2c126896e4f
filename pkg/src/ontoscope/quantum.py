"""Qubit states, projective measurements and Born-rule tables."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionMismatch, DomainError, LabelMismatch, SubsystemOverflow, UnsupportedPair
from .ontology import PHI, PSI, EmpiricalModel, exclusion_label

EXACT_TOL = 1e-12
USER_TOL = 1e-9
SUBSYSTEM_CAP = 10**6


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).ravel()
        k = amp.size
        if k < 2 or k & (k - 1):
            raise DimensionMismatch(f"state length {k} is not a power of two")
        if abs(np.vdot(amp, amp).real - 1.0) > EXACT_TOL:
            raise DomainError("state is not normalized")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    @property
    def qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def inner(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self, other: "PureState") -> "PureState":
        return PureState(np.kron(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class Measurement:
    labels: tuple
    effects: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        effects = tuple(np.array(e, dtype=complex) for e in self.effects)
        if len(labels) != len(effects) or len(set(labels)) != len(labels):
            raise LabelMismatch("one unique label per effect required")
        dim = effects[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for e in effects:
            if e.shape != (dim, dim) or not np.allclose(e, e.conj().T, atol=EXACT_TOL):
                raise DomainError("effects must be Hermitian and of equal size")
            ev = np.linalg.eigvalsh(e)
            if ev.min() < -EXACT_TOL or ev.max() > 1 + EXACT_TOL:
                raise DomainError("effect eigenvalues must lie in [0, 1]")
            e.flags.writeable = False
            total += e
        if np.abs(total - np.eye(dim)).max() > EXACT_TOL:
            raise DomainError("effects do not sum to the identity")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @classmethod
    def from_basis(cls, labels, vectors) -> "Measurement":
        return cls(labels, [np.outer(v, np.conj(v)) for v in vectors])

    def probability(self, label, state: PureState) -> float:
        e = self.effects[self.labels.index(label)]
        return float(np.vdot(state.amplitudes, e @ state.amplitudes).real)


@dataclass(frozen=True)
class PreparationPair:
    psi: PureState
    phi: PureState
    theta: float

    def __post_init__(self):
        if self.psi.qubits != self.phi.qubits:
            raise DimensionMismatch("pair states must have the same dimension")
        if abs(abs(self.psi.inner(self.phi)) - 1.0) < USER_TOL:
            raise DomainError("pair states must be distinct rays")

    @property
    def overlap(self) -> float:
        return abs(self.psi.inner(self.phi))


def canonical_pair(theta: float) -> PreparationPair:
    """psi = |0>, phi = cos(theta)|0> + sin(theta)|1>."""
    if not (0 < theta <= math.pi / 2 + EXACT_TOL):
        raise DomainError(f"theta must lie in (0, pi/2], got {theta}")
    psi = PureState([1.0, 0.0])
    phi = PureState([math.cos(theta), math.sin(theta)])
    return PreparationPair(psi, phi, float(theta))


def min_subsystems(theta: float) -> int:
    """Smallest number of copies admitting a conclusive exclusion measurement.

    Reads the bound as ``ceil(1 / log2(tan(theta/2) + 1))``.
    """
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    if theta > math.pi / 2 + EXACT_TOL:
        raise DomainError(f"theta must be at most pi/2, got {theta}")
    x = 1.0 / math.log2(math.tan(theta / 2) + 1.0)
    if x > SUBSYSTEM_CAP:
        raise SubsystemOverflow(f"more than {SUBSYSTEM_CAP} subsystems needed")
    # absorb rounding so that exact integers are not pushed up by one
    return max(1, math.ceil(x - 1e-9))


def _orthonormal_frame(pair: PreparationPair):
    """Unitary columns (a, a_perp) with phi ~ (a + a_perp)/sqrt(2) up to phase."""
    a = pair.psi.amplitudes
    ip = np.vdot(a, pair.phi.amplitudes)
    phi = pair.phi.amplitudes * np.exp(-1j * np.angle(ip))
    perp = phi - np.vdot(a, phi) * a
    perp = perp / np.linalg.norm(perp)
    return np.column_stack([a, perp])


def pbr_measurement(pair: PreparationPair) -> Measurement:
    """Entangled two-qubit basis excluding one product preparation per outcome.

    Only pairs with overlap sqrt(2)/2 are supported. The basis is written in
    the frame where psi = |0> and phi = |+>, then rotated onto the pair; the
    exclusion zeros are checked on the resulting Born table before returning.
    """
    if pair.psi.qubits != 1:
        raise UnsupportedPair("single-qubit preparations required")
    if abs(pair.overlap - math.sqrt(0.5)) > USER_TOL:
        raise UnsupportedPair(f"overlap {pair.overlap:.6g} != sqrt(2)/2")
    zero, one = np.array([1, 0], complex), np.array([0, 1], complex)
    plus, minus = (zero + one) / math.sqrt(2), (zero - one) / math.sqrt(2)
    k = np.kron
    s = 1 / math.sqrt(2)
    canonical = [
        s * (k(zero, one) + k(one, zero)),
        s * (k(zero, minus) + k(one, plus)),
        s * (k(plus, one) + k(minus, zero)),
        s * (k(plus, minus) + k(minus, plus)),
    ]
    U = _orthonormal_frame(pair)
    UU = np.kron(U, U)
    vectors = [UU @ v for v in canonical]
    labels = [exclusion_label(p) for p in itertools.product((PSI, PHI), repeat=2)]
    meas = Measurement.from_basis(labels, vectors)
    ok, bad = is_conclusive_exclusion(born_table(pair, meas))
    if not ok:
        raise UnsupportedPair(f"constructed basis fails exclusion at {bad}")
    return meas


def born_table(pair: PreparationPair, meas: Measurement) -> EmpiricalModel:
    """Born probabilities for every product preparation over {psi, phi}^m."""
    m = int(round(math.log2(meas.dim)))
    if 2**m != meas.dim or m % pair.psi.qubits:
        raise DimensionMismatch(f"measurement dimension {meas.dim} is not 2^m")
    copies = m // pair.psi.qubits
    states = {PSI: pair.psi, PHI: pair.phi}
    table = np.zeros((2,) * copies + (len(meas.labels),))
    for idx in itertools.product(range(2), repeat=copies):
        preps = [(PSI, PHI)[i] for i in idx]
        joint = reduce(PureState.tensor, [states[p] for p in preps])
        table[idx] = [meas.probability(o, joint) for o in meas.labels]
    return EmpiricalModel(((PSI, PHI),) * copies, meas.labels, table)


def is_conclusive_exclusion(table: EmpiricalModel, tol=EXACT_TOL):
    """True iff p(not(p) | p) vanishes for every joint preparation p.

    Returns ``(holds, violations)`` where violations lists
    ``(preparation, outcome, probability)`` for each non-zero exclusion cell.
    """
    contexts = table.contexts()
    wanted = {exclusion_label(p): p for p in contexts}
    if set(wanted) != set(table.outcomes) or len(wanted) != len(table.outcomes):
        raise LabelMismatch("outcomes are not in bijection with joint preparations")
    bad = []
    for label, preps in wanted.items():
        value = table.entry(label, preps)
        if abs(value) > tol:
            bad.append((preps, label, value))
    return not bad, bad


def reference_table() -> EmpiricalModel:
    """Quantum predictions for the two-copy exclusion experiment, as printed."""
    q, h = 0.25, 0.5
    rows = [[0, q, q, h], [q, 0, h, q], [q, h, 0, q], [h, q, q, 0]]
    labels = [exclusion_label(p) for p in itertools.product((PSI, PHI), repeat=2)]
    return EmpiricalModel(((PSI, PHI),) * 2, labels, np.array(rows, float).reshape(2, 2, 4))

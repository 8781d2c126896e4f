"""Finite ontological models: ontic spaces, conditional ontic distributions,
response functions, operational tables and overlaps.

Everything is dense. A :class:`CondDist` on ``n`` sites stores an array of
shape ``(|P_1|, ..., |P_n|, |Lambda|, ..., |Lambda|)``; the first ``n`` axes
index preparations, the last ``n`` index ontic states.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ArityMismatch,
    DomainError,
    IllDefinedMarginal,
    InvalidModel,
    LabelMismatch,
    ShapeMismatch,
    SpaceMismatch,
)

PSI, PHI = "psi", "phi"
USER_TOL = 1e-9
EXACT_TOL = 1e-12
SUPPORT_TOL = 1e-12


def exclusion_label(preps: Sequence[str]) -> str:
    """Outcome label that rules out the joint preparation ``preps``."""
    return "not(" + ".".join(preps) + ")"


def _check_label(label):
    if not isinstance(label, str) or not label or "," in label:
        raise LabelMismatch(f"labels must be non-empty strings without commas: {label!r}")


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class OnticSpace:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise DomainError("ontic space must be non-empty")
        if len(set(labels)) != len(labels):
            raise DomainError("ontic labels must be unique")
        for lab in labels:
            _check_label(lab)

    @classmethod
    def of_size(cls, k: int) -> "OnticSpace":
        return cls(tuple(f"l{i + 1}" for i in range(k)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True, eq=False)
class CondDist:
    """Conditional distribution mu(lambda_1..lambda_n | p_1..p_n)."""

    space: OnticSpace
    prep_labels: tuple
    table: np.ndarray

    def __post_init__(self):
        preps = tuple(tuple(p) for p in self.prep_labels)
        object.__setattr__(self, "prep_labels", preps)
        for ps in preps:
            if not ps or len(set(ps)) != len(ps):
                raise DomainError("each site needs distinct preparation labels")
            for lab in ps:
                _check_label(lab)
        table = _frozen(self.table)
        expected = tuple(len(p) for p in preps) + (self.space.size,) * len(preps)
        if table.shape != expected:
            raise ShapeMismatch(f"table shape {table.shape} != {expected}")
        object.__setattr__(self, "table", table)

    @property
    def n(self) -> int:
        return len(self.prep_labels)

    @property
    def prep_shape(self) -> tuple:
        return tuple(len(p) for p in self.prep_labels)

    def contexts(self):
        """All joint preparations as label tuples, in lexicographic order."""
        return list(itertools.product(*self.prep_labels))

    def prep_index(self, preps) -> tuple:
        if len(preps) != self.n:
            raise ArityMismatch(f"expected {self.n} preparation labels")
        try:
            return tuple(ps.index(p) for ps, p in zip(self.prep_labels, preps))
        except ValueError as exc:
            raise LabelMismatch(str(exc)) from None

    def row(self, preps) -> np.ndarray:
        return self.table[self.prep_index(preps)]

    def ontic_tuple(self, idx) -> tuple:
        return tuple(self.space.labels[i] for i in idx)

    def shares_sites(self) -> bool:
        return all(p == self.prep_labels[0] for p in self.prep_labels)

    def violations(self, tol=USER_TOL) -> list:
        out = []
        axes = tuple(range(self.n, 2 * self.n))
        sums = self.table.sum(axis=axes) if self.n else np.array(self.table.sum())
        for pidx in np.ndindex(*self.prep_shape):
            if abs(sums[pidx] - 1.0) > tol:
                out.append(Violation("normalization", self._ctx(pidx), float(sums[pidx] - 1.0)))
        neg = np.argwhere(self.table < -tol)
        for idx in neg:
            idx = tuple(idx)
            loc = (self._ctx(idx[: self.n]), self.ontic_tuple(idx[self.n:]))
            out.append(Violation("negative", loc, float(self.table[idx])))
        return out

    def _ctx(self, pidx) -> tuple:
        return tuple(ps[i] for ps, i in zip(self.prep_labels, pidx))

    def allclose(self, other: "CondDist", tol=USER_TOL) -> bool:
        return (
            self.prep_labels == other.prep_labels
            and self.space == other.space
            and np.allclose(self.table, other.table, atol=tol, rtol=0)
        )


@dataclass(frozen=True, eq=False)
class ResponseFunctions:
    """xi(o | lambda_1..lambda_k), stored with the outcome axis first."""

    outcomes: tuple
    xi: np.ndarray

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        if len(set(outcomes)) != len(outcomes) or not outcomes:
            raise DomainError("outcome labels must be unique and non-empty")
        for lab in outcomes:
            _check_label(lab)
        xi = _frozen(self.xi)
        if xi.shape[0] != len(outcomes):
            raise ShapeMismatch("first axis of xi must index outcomes")
        if len(set(xi.shape[1:])) > 1:
            raise ShapeMismatch("all ontic axes of xi must have the same size")
        object.__setattr__(self, "xi", xi)

    @property
    def sites(self) -> int:
        return self.xi.ndim - 1

    def totals(self) -> np.ndarray:
        return self.xi.sum(axis=0)


@dataclass(frozen=True, eq=False)
class OntologicalModel:
    space: OnticSpace
    preps: CondDist
    responses: ResponseFunctions
    measured_sites: tuple = None

    def __post_init__(self):
        if self.preps.space != self.space:
            raise SpaceMismatch("preparation distribution lives on a different ontic space")
        sites = tuple(range(self.preps.n)) if self.measured_sites is None else tuple(self.measured_sites)
        object.__setattr__(self, "measured_sites", sites)
        if len(sites) != self.responses.sites or len(set(sites)) != len(sites):
            raise ArityMismatch("responses must act on the measured sites")
        if any(s < 0 or s >= self.preps.n for s in sites):
            raise ArityMismatch("measured site out of range")
        if self.responses.sites and self.responses.xi.shape[1] != self.space.size:
            raise SpaceMismatch("responses defined on a different ontic space size")


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    """p(outcome | joint preparation); table shape ``(*prep sizes, |O|)``."""

    prep_labels: tuple
    outcomes: tuple
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prep_labels", tuple(tuple(p) for p in self.prep_labels))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        for lab in self.outcomes + tuple(x for p in self.prep_labels for x in p):
            _check_label(lab)
        table = _frozen(self.table)
        expected = tuple(len(p) for p in self.prep_labels) + (len(self.outcomes),)
        if table.shape != expected:
            raise ShapeMismatch(f"table shape {table.shape} != {expected}")
        object.__setattr__(self, "table", table)

    @property
    def n(self) -> int:
        return len(self.prep_labels)

    def contexts(self):
        return list(itertools.product(*self.prep_labels))

    def prep_index(self, preps) -> tuple:
        try:
            return tuple(ps.index(p) for ps, p in zip(self.prep_labels, preps))
        except ValueError as exc:
            raise LabelMismatch(str(exc)) from None

    def entry(self, outcome, preps) -> float:
        return float(self.table[self.prep_index(preps) + (self.outcomes.index(outcome),)])

    def row(self, preps) -> np.ndarray:
        return self.table[self.prep_index(preps)]

    def max_difference(self, other: "EmpiricalModel") -> float:
        if self.prep_labels != other.prep_labels or self.outcomes != other.outcomes:
            raise LabelMismatch("tables have different labels")
        return float(np.abs(self.table - other.table).max())


@dataclass(frozen=True)
class Violation:
    kind: str
    location: tuple
    value: float


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class OverlapReport:
    omega: float
    delta: tuple
    per_prep_mass: dict
    distance: float


def reachable(dist: CondDist, tol=SUPPORT_TOL) -> np.ndarray:
    """Boolean mask over ontic tuples with positive mass under some preparation."""
    flat = dist.table.reshape((-1,) + dist.table.shape[dist.n:])
    return (flat > tol).any(axis=0)


def measured_reachable(model: OntologicalModel, tol=SUPPORT_TOL) -> np.ndarray:
    return _measured_joint(model).reshape(
        (-1,) + (model.space.size,) * model.responses.sites
    ).max(axis=0) > tol


def _measured_joint(model: OntologicalModel) -> np.ndarray:
    """mu restricted to the measured sites, axes ordered as measured_sites."""
    n = model.preps.n
    drop = tuple(n + s for s in range(n) if s not in model.measured_sites)
    joint = model.preps.table.sum(axis=drop) if drop else model.preps.table
    kept = sorted(model.measured_sites)
    order = [kept.index(s) for s in model.measured_sites]
    return np.transpose(joint, tuple(range(n)) + tuple(n + k for k in order))


def validate(model: OntologicalModel, tol=USER_TOL) -> ValidationReport:
    """Report every normalization and range violation in ``model``.

    Response normalization is only demanded on ontic tuples that some
    preparation reaches; unreachable tuples with unnormalized responses are
    listed under ``notes`` instead.
    """
    report = ValidationReport(violations=model.preps.violations(tol))
    xi = model.responses.xi
    lab = model.space.labels
    for idx in np.argwhere((xi < -tol) | (xi > 1 + tol)):
        idx = tuple(idx)
        loc = (model.responses.outcomes[idx[0]], tuple(lab[i] for i in idx[1:]))
        report.violations.append(Violation("response_range", loc, float(xi[idx])))
    totals = model.responses.totals()
    live = measured_reachable(model)
    for idx in np.argwhere(np.abs(totals - 1.0) > tol):
        idx = tuple(idx)
        v = Violation("response_normalization", tuple(lab[i] for i in idx), float(totals[idx] - 1.0))
        (report.violations if live[idx] else report.notes).append(v)
    return report


def operational_table(model: OntologicalModel, check=True) -> EmpiricalModel:
    """p(o | p) = sum over lambda of xi_o(lambda) mu(lambda | p)."""
    if check:
        report = validate(model)
        if not report.ok:
            raise InvalidModel(f"model fails validation: {report.violations[:3]}", report)
    n = model.preps.n
    joint = _measured_joint(model)
    k = model.responses.sites
    table = np.tensordot(joint, model.responses.xi, axes=(list(range(n, n + k)), list(range(1, k + 1))))
    return EmpiricalModel(model.preps.prep_labels, model.responses.outcomes, table)


def trace_distance(d1, d2) -> float:
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    if d1.shape != d2.shape:
        raise SpaceMismatch(f"distributions on different spaces: {d1.shape} vs {d2.shape}")
    return float(0.5 * np.abs(d1 - d2).sum())


def conditional_distance(t1, t2, n_prep_axes: int) -> float:
    """Largest trace distance over conditioning contexts.

    The leading ``n_prep_axes`` axes of both arrays index the context; the
    remaining axes hold a distribution.
    """
    t1, t2 = np.asarray(t1, dtype=float), np.asarray(t2, dtype=float)
    if t1.shape != t2.shape:
        raise SpaceMismatch(f"tables of different shapes: {t1.shape} vs {t2.shape}")
    axes = tuple(range(n_prep_axes, t1.ndim))
    return float(0.5 * np.abs(t1 - t2).sum(axis=axes).max(initial=0.0))


def signalling_discrepancy(dist: CondDist, sites) -> tuple:
    """Worst dependence of the marginal on ``sites`` upon the other preparations.

    Returns ``(value, context_a, context_b, ontic_tuple)``; value 0 means the
    marginal is well defined.
    """
    n = dist.n
    sites = tuple(sites)
    other = tuple(s for s in range(n) if s not in sites)
    drop = tuple(n + s for s in other)
    marg = dist.table.sum(axis=drop) if drop else dist.table
    if not other:
        return 0.0, None, None, None
    # bring the other preparation axes to the front and flatten them
    perm = other + sites + tuple(range(n, n + len(sites)))
    arr = np.transpose(marg, perm)
    n_other = int(np.prod([dist.prep_shape[s] for s in other]))
    arr = arr.reshape((n_other,) + arr.shape[len(other):])
    spread = arr.max(axis=0) - arr.min(axis=0)
    value = float(spread.max())
    if value == 0.0:
        return 0.0, None, None, None
    cell = np.unravel_index(int(np.argmax(spread)), spread.shape)
    hi, lo = int(np.argmax(arr[(slice(None),) + cell])), int(np.argmin(arr[(slice(None),) + cell]))
    site_preps = cell[: len(sites)]
    ontic = dist.ontic_tuple(cell[len(sites):])

    def ctx(k):
        oidx = np.unravel_index(k, [dist.prep_shape[s] for s in other])
        full = [None] * n
        for s, i in zip(other, oidx):
            full[s] = dist.prep_labels[s][i]
        for s, i in zip(sites, site_preps):
            full[s] = dist.prep_labels[s][i]
        return tuple(full)

    return value, ctx(hi), ctx(lo), ontic


def marginal_sites(dist: CondDist, sites, tol=USER_TOL) -> CondDist:
    """Marginal on ``sites`` (in the given order); must not depend on other preparations."""
    sites = tuple(sites)
    if len(set(sites)) != len(sites) or any(s < 0 or s >= dist.n for s in sites):
        raise ArityMismatch(f"bad site selection {sites}")
    value, a, b, ontic = signalling_discrepancy(dist, sites)
    if value > tol:
        raise IllDefinedMarginal(
            f"marginal on sites {sites} depends on other preparations "
            f"(contexts {a} vs {b}, ontic {ontic}, discrepancy {value:.3g})",
            site=sites, contexts=(a, b), discrepancy=value,
        )
    n = dist.n
    other = tuple(s for s in range(n) if s not in sites)
    drop = tuple(n + s for s in other)
    marg = dist.table.sum(axis=drop) if drop else dist.table
    marg = marg[tuple(0 if s in other else slice(None) for s in range(n))]
    # remaining axes: kept prep axes (ascending), kept ontic axes (ascending)
    kept = sorted(sites)
    k = len(kept)
    order = [kept.index(s) for s in sites]
    marg = np.transpose(marg, order + [k + i for i in order])
    return CondDist(dist.space, tuple(dist.prep_labels[s] for s in sites), marg)


def marginal(dist: CondDist, site: int, tol=USER_TOL) -> CondDist:
    return marginal_sites(dist, (site,), tol)


def overlap(model, p: str, q: str, site: int = 0, allow_equal=False, tol=USER_TOL) -> OverlapReport:
    """Epistemic overlap 1 - D(mu_p, mu_q) of two preparations at ``site``.

    ``model`` may be an OntologicalModel or a bare CondDist.
    """
    dist = model.preps if isinstance(model, OntologicalModel) else model
    if p == q and not allow_equal:
        raise DomainError("overlap needs two distinct preparations")
    single = marginal(dist, site, tol)
    mp, mq = single.row((p,)), single.row((q,))
    return overlap_of(mp, mq, dist.space, (p, q))


def overlap_of(mp, mq, space: OnticSpace, names=("p", "q")) -> OverlapReport:
    mp, mq = np.asarray(mp, dtype=float), np.asarray(mq, dtype=float)
    dist = trace_distance(mp, mq)
    omega = 1.0 - dist
    inside = np.minimum(mp, mq) > SUPPORT_TOL
    delta = tuple(lab for lab, keep in zip(space.labels, inside) if keep)
    mass = {names[0]: float(mp[inside].sum()), names[1]: float(mq[inside].sum())}
    return OverlapReport(omega=omega, delta=delta, per_prep_mass=mass, distance=dist)


def _check_shared(dist: CondDist):
    if not dist.shares_sites():
        raise ArityMismatch("permutations need identical preparation sets on every site")


def permute(dist: CondDist, pi) -> CondDist:
    """Relabel sites: (pi . sigma)(x_1..x_n) = sigma(x_{pi^-1(1)}..x_{pi^-1(n)}).

    ``pi`` is a 0-based sequence with ``pi[j] = pi(j)``, applied to ontic and
    preparation indices simultaneously. Composition follows
    ``permute(permute(d, pi), rho) == permute(d, [pi[rho[j]] for j])``.
    """
    pi = tuple(int(i) for i in pi)
    if sorted(pi) != list(range(dist.n)):
        raise ArityMismatch(f"{pi} is not a permutation of {dist.n} sites")
    _check_shared(dist)
    n = dist.n
    axes = pi + tuple(n + i for i in pi)
    return CondDist(dist.space, dist.prep_labels, np.transpose(dist.table, axes))


def is_symmetric(dist: CondDist, tol=USER_TOL) -> bool:
    _check_shared(dist)
    for i, j in itertools.combinations(range(dist.n), 2):
        pi = list(range(dist.n))
        pi[i], pi[j] = j, i
        if not permute(dist, pi).allclose(dist, tol):
            return False
    return True


def symmetrize(dist: CondDist) -> CondDist:
    """Average of pi . dist over the whole symmetric group."""
    _check_shared(dist)
    acc = np.zeros_like(dist.table)
    perms = list(itertools.permutations(range(dist.n)))
    for pi in perms:
        acc += permute(dist, pi).table
    return CondDist(dist.space, dist.prep_labels, acc / len(perms))


def product_dist(*factors: CondDist) -> CondDist:
    """Preparation-independent composition of site blocks."""
    space = factors[0].space
    if any(f.space != space for f in factors):
        raise SpaceMismatch("factors live on different ontic spaces")
    table = np.ones(())
    preps = []
    for f in factors:
        table = np.multiply.outer(table, f.table)
        preps.extend(f.prep_labels)
    # axes are currently (p_f1, l_f1, p_f2, l_f2, ...); regroup preps first
    order_p, order_l, pos = [], [], 0
    for f in factors:
        order_p.extend(range(pos, pos + f.n))
        order_l.extend(range(pos + f.n, pos + 2 * f.n))
        pos += 2 * f.n
    return CondDist(space, tuple(preps), np.transpose(table, order_p + order_l))


def single_site(space: OnticSpace, rows: dict) -> CondDist:
    """Single-site CondDist from ``{prep: distribution}``."""
    labels = tuple(rows)
    return CondDist(space, (labels,), np.array([rows[p] for p in labels], dtype=float))


# --- the PBR toy model -------------------------------------------------------

TOY_SPACE = OnticSpace(("l1", "l2", "l3"))


def _check_omegas(omega1, omega2):
    if not (omega1 > 0 and omega2 > 0 and omega1 + omega2 <= 1 + EXACT_TOL):
        raise DomainError(f"need omega1, omega2 > 0 and omega1 + omega2 <= 1, got {omega1}, {omega2}")


def toy_joint(omega1=0.5, omega2=0.5) -> CondDist:
    """Bipartite toy behaviour on {l1, l2, l3}.

    The overlap region is {l3}. Its complement meets supp(psi) only in l1 and
    supp(phi) only in l2, so the region masses fix every ontic cell.
    """
    _check_omegas(omega1, omega2)
    w = {PSI: omega1, PHI: omega2}
    outside = {PSI: 0, PHI: 1}
    inside = 2
    table = np.zeros((2, 2, 3, 3))
    for a, pa in enumerate((PSI, PHI)):
        for b, pb in enumerate((PSI, PHI)):
            table[a, b, inside, outside[pb]] += w[pa]
            table[a, b, outside[pa], inside] += w[pb]
            table[a, b, outside[pa], outside[pb]] += 1.0 - w[pa] - w[pb]
    return CondDist(TOY_SPACE, ((PSI, PHI), (PSI, PHI)), table)


def toy_responses() -> ResponseFunctions:
    """Response functions of the toy model; (l3, l3) is left with all zeros."""
    cells = {
        (PSI, PSI): ([(1, 1)], [(2, 1), (1, 2)]),
        (PSI, PHI): ([(1, 0)], [(2, 0), (1, 2)]),
        (PHI, PSI): ([(0, 1)], [(0, 2), (2, 1)]),
        (PHI, PHI): ([(0, 0)], [(0, 2), (2, 0)]),
    }
    outcomes = tuple(exclusion_label(p) for p in cells)
    xi = np.zeros((4, 3, 3))
    for o, (ones, halves) in enumerate(cells.values()):
        for cell in ones:
            xi[(o,) + cell] = 1.0
        for cell in halves:
            xi[(o,) + cell] = 0.5
    return ResponseFunctions(outcomes, xi)


def toy_model(omega1=0.5, omega2=0.5) -> OntologicalModel:
    return OntologicalModel(TOY_SPACE, toy_joint(omega1, omega2), toy_responses())


def toy_marginals(omega1=0.5, omega2=0.5) -> CondDist:
    _check_omegas(omega1, omega2)
    return single_site(TOY_SPACE, {PSI: [1 - omega1, 0.0, omega1], PHI: [0.0, 1 - omega2, omega2]})


def toy_extension(n: int, omega1=0.5, omega2=0.5) -> CondDist:
    """Symmetrised n-site behaviour built from n/2 independent toy pairs."""
    if n < 2 or n % 2:
        raise DomainError("toy extension needs an even number of sites >= 2")
    pair = toy_joint(omega1, omega2)
    return symmetrize(product_dist(*([pair] * (n // 2))))


def overlap_sweep(omegas1, omegas2) -> list:
    """Rows (omega1, omega2, omega, delta_size) for the toy model grid."""
    rows = []
    for w1 in omegas1:
        for w2 in omegas2:
            if w1 + w2 > 1 + EXACT_TOL:
                continue
            rep = overlap(toy_joint(w1, w2), PSI, PHI, site=0)
            rows.append((float(w1), float(w2), rep.omega, len(rep.delta)))
    return rows


# --- sampling ----------------------------------------------------------------

PRNG_METADATA = {
    "algorithm": "Philox4x64-10",
    "multipliers": ["0xD2E7470EE14C6C93", "0xCA5A826395121157"],
    "weyl_keys": ["0x9E3779B97F4A7C15", "0xBB67AE8584CAA73B"],
    "seeding": "numpy SeedSequence([seed, shard]) -> Philox key",
}


@dataclass(frozen=True)
class SampleResult:
    preps: tuple
    shots: int
    counts: dict
    prng: dict

    def frequencies(self) -> dict:
        return {o: c / self.shots for o, c in self.counts.items()}


def make_rng(seed: int, shard: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(shard)])))


def sample(model: OntologicalModel, preps, shots: int, seed: int, shard: int = 0) -> SampleResult:
    """Monte Carlo run: draw ontic states, then outcomes, ``shots`` times."""
    report = validate(model)
    if not report.ok:
        raise InvalidModel("cannot sample from an invalid model", report)
    if shots < 1:
        raise DomainError("shots must be >= 1")
    rng = make_rng(seed, shard)
    row = _measured_joint(model)[model.preps.prep_index(tuple(preps))]
    probs = np.clip(row.ravel(), 0.0, None)
    ontic_counts = rng.multinomial(shots, probs / probs.sum())
    xi = model.responses.xi.reshape(len(model.responses.outcomes), -1)
    totals = np.zeros(len(model.responses.outcomes), dtype=np.int64)
    for cell in np.flatnonzero(ontic_counts):
        pvals = np.clip(xi[:, cell], 0.0, None)
        totals += rng.multinomial(int(ontic_counts[cell]), pvals / pvals.sum())
    counts = {o: int(c) for o, c in zip(model.responses.outcomes, totals)}
    meta = dict(PRNG_METADATA, seed=int(seed), shard=int(shard))
    return SampleResult(tuple(preps), int(shots), counts, meta)


def binomial_sigma(p: float, shots: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / shots)

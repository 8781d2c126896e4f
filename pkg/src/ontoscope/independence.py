"""Checkers and witness search for the three independence notions.

* preparation independence: the joint ontic distribution is the product of
  single-site marginals;
* classical correlations: factorisation after conditioning on a common-past
  variable (verified against an explicit :class:`CCWitness`);
* subsystem condition: each site's marginal ignores the other preparations.

All verdicts use the max-norm over table cells.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import SearchSpaceTooLarge, ShapeMismatch
from .lp import LinearProgram, lp_solve
from .ontology import (
    PHI,
    PSI,
    TOY_SPACE,
    CondDist,
    marginal,
    overlap_of,
    signalling_discrepancy,
)

TOL = 1e-9


@dataclass(frozen=True)
class IndependenceVerdict:
    holds: bool
    max_violation: float
    witness_context: tuple | None
    check: str = ""
    details: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class CCWitness:
    """Common-past decomposition sum_c weight(c) prod_i locals[i](lambda_i | p_i, c).

    ``locals[i]`` has shape ``(|P_i|, |Lambda_c|, |Lambda|)``.
    """

    common_past: tuple
    weight: np.ndarray
    locals: tuple

    def __post_init__(self):
        object.__setattr__(self, "common_past", tuple(self.common_past))
        object.__setattr__(self, "weight", np.asarray(self.weight, dtype=float))
        object.__setattr__(self, "locals", tuple(np.asarray(a, dtype=float) for a in self.locals))

    @property
    def n(self) -> int:
        return len(self.locals)

    def reconstruct(self) -> np.ndarray:
        n = self.n
        out = 0.0
        for c, wc in enumerate(self.weight):
            term = np.ones(())
            for loc in self.locals:
                term = np.multiply.outer(term, loc[:, c, :])
            # term axes: (p1, l1, p2, l2, ...) -> (p1..pn, l1..ln)
            order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
            out = out + wc * np.transpose(term, order)
        return np.asarray(out)


def _product_of_marginals(dist: CondDist, marginals) -> np.ndarray:
    n = dist.n
    prod = np.ones(dist.table.shape)
    for i, m in enumerate(marginals):
        shape = [1] * (2 * n)
        shape[i] = m.table.shape[0]
        shape[n + i] = m.table.shape[1]
        prod = prod * m.table.reshape(shape)
    return prod


def check_subsystem_condition(dist: CondDist, tol=TOL) -> IndependenceVerdict:
    """Single-site marginals must not depend on other sites' preparations."""
    worst = (0.0, None)
    for site in range(dist.n):
        value, a, b, ontic = signalling_discrepancy(dist, (site,))
        if value > worst[0]:
            worst = (value, {"site": site, "contexts": (a, b), "ontic": ontic})
    value, ctx = worst
    return IndependenceVerdict(value <= tol, value, ctx, "subsystem")


def check_preparation_independence(dist: CondDist, tol=TOL) -> IndependenceVerdict:
    """Joint distribution equals the product of the single-site marginals.

    Among cells attaining the maximal violation, the certificate prefers one
    where the joint mass is zero while the product is positive, and among
    those one lying in the region every preparation reaches on each site.
    """
    if dist.n < 2:
        return IndependenceVerdict(True, 0.0, None, "preparation")
    sub = check_subsystem_condition(dist, tol)
    if not sub.holds:
        return IndependenceVerdict(False, sub.max_violation, sub.witness_context, "preparation",
                                   {"failed": "subsystem"})
    margs = [marginal(dist, i, tol) for i in range(dist.n)]
    prod = _product_of_marginals(dist, margs)
    diff = np.abs(dist.table - prod)
    value = float(diff.max())
    if value <= tol:
        return IndependenceVerdict(True, value, None, "preparation")
    near = [tuple(c) for c in np.argwhere(diff >= value - 1e-12)]
    n = dist.n
    # per-site region reached by every preparation
    shared = [(m.table > 1e-12).all(axis=0) for m in margs]

    def rank(cell):
        empty = dist.table[cell] <= 1e-12
        inside = all(shared[i][cell[n + i]] for i in range(n))
        return (not empty, not inside)

    pick = min(near, key=rank)
    context = {
        "preparations": dist._ctx(pick[:n]),
        "ontic": dist.ontic_tuple(pick[n:]),
        "joint": float(dist.table[pick]),
        "product": float(prod[pick]),
    }
    return IndependenceVerdict(False, value, context, "preparation",
                               {"tied_cells": len(near)})


def verify_cc_witness(dist: CondDist, w: CCWitness, tol=TOL) -> IndependenceVerdict:
    """Check that ``w`` reconstructs ``dist`` and is a valid decomposition.

    Factorisation given each common-past value holds by construction of the
    witness; what is checked is normalisation and the reconstruction residual.
    ``details`` carries the per-site, per-value conditional overlaps.
    """
    if w.n != dist.n:
        raise ShapeMismatch(f"witness has {w.n} sites, distribution has {dist.n}")
    C, L = len(w.common_past), dist.space.size
    if w.weight.shape != (C,):
        raise ShapeMismatch("weight must have one entry per common-past value")
    for i, loc in enumerate(w.locals):
        if loc.shape != (dist.prep_shape[i], C, L):
            raise ShapeMismatch(f"locals[{i}] has shape {loc.shape}")
    problems = []
    if abs(w.weight.sum() - 1.0) > tol or (w.weight < -tol).any():
        problems.append(("weight", float(w.weight.sum() - 1.0)))
    for i, loc in enumerate(w.locals):
        bad = np.abs(loc.sum(axis=2) - 1.0).max()
        if bad > tol or (loc < -tol).any():
            problems.append((f"locals[{i}]", float(bad)))
    residual_arr = np.abs(w.reconstruct() - dist.table)
    residual = float(residual_arr.max())
    cell = np.unravel_index(int(np.argmax(residual_arr)), residual_arr.shape)
    overlaps = {}
    for i, loc in enumerate(w.locals):
        labels = dist.prep_labels[i]
        if len(labels) < 2:
            continue
        for c, name in enumerate(w.common_past):
            rep = overlap_of(loc[0, c], loc[1, c], dist.space, labels[:2])
            overlaps[(i, name)] = rep.omega
    worst = max([residual] + [abs(v) for _, v in problems])
    where = None
    if residual > tol:
        n = dist.n
        where = {"preparations": dist._ctx(cell[:n]), "ontic": dist.ontic_tuple(cell[n:])}
    elif problems:
        where = {"normalization": problems}
    return IndependenceVerdict(
        worst <= tol, worst, where, "classical-correlation",
        {"residual": residual, "conditional_overlaps": overlaps, "problems": problems},
    )


def trivial_witness(dist: CondDist, tol=TOL) -> CCWitness:
    """Single-valued witness built from the single-site marginals."""
    margs = [marginal(dist, i, tol) for i in range(dist.n)]
    return CCWitness(("c0",), np.ones(1), tuple(m.table[:, None, :] for m in margs))


def find_cc_witness(dist: CondDist, max_c: int, deterministic_locals=True, tol=TOL):
    """Search for a common-past witness with at most ``max_c`` values.

    With deterministic locals every site maps (preparation, c) to one ontic
    state. Strategies incompatible with the support of ``dist`` are pruned,
    then sets of strategies are tried in lexicographic order with a
    feasibility LP over the weights. Returns ``None`` when the (exhaustive)
    search of that class finds nothing.
    """
    if dist.n != 2:
        raise SearchSpaceTooLarge("witness search is limited to two sites")
    L = dist.space.size
    if L > 4:
        raise SearchSpaceTooLarge("witness search is limited to |Lambda| <= 4")
    if not deterministic_locals:
        if max_c != 1:
            raise SearchSpaceTooLarge("stochastic locals are only searched with a single value")
        if check_preparation_independence(dist, tol).holds:
            return trivial_witness(dist, tol)
        return None
    if max_c > 3:
        raise SearchSpaceTooLarge("deterministic search is limited to max_c <= 3")
    pa, pb = dist.prep_shape
    support = dist.table > tol
    valid = []
    for assign in itertools.product(range(L), repeat=pa + pb):
        a, b = assign[:pa], assign[pa:]
        if all(support[i, j, a[i], b[j]] for i in range(pa) for j in range(pb)):
            valid.append((a, b))
    target = dist.table.ravel()
    for size in range(1, max_c + 1):
        for combo in itertools.combinations(valid, size):
            K = np.stack([_strategy_table(dist, a, b).ravel() for a, b in combo], axis=1)
            sol = lp_solve(LinearProgram.build(np.zeros(size), A_eq=K, b_eq=target))
            if sol.optimal:
                return _deterministic_witness(dist, combo, sol.x)
    return None


def _strategy_table(dist, a, b):
    t = np.zeros(dist.table.shape)
    for i in range(len(a)):
        for j in range(len(b)):
            t[i, j, a[i], b[j]] = 1.0
    return t


def _deterministic_witness(dist, combo, weights):
    C, L = len(combo), dist.space.size
    locs = [np.zeros((dist.prep_shape[s], C, L)) for s in range(2)]
    for c, (a, b) in enumerate(combo):
        for i, lam in enumerate(a):
            locs[0][i, c, lam] = 1.0
        for j, lam in enumerate(b):
            locs[1][j, c, lam] = 1.0
    w = np.clip(weights, 0.0, None)
    return CCWitness(tuple(f"c{k + 1}" for k in range(C)), w / w.sum(), tuple(locs))


def toy_witness() -> CCWitness:
    """Two-valued deterministic witness for the toy behaviour at omega = 1/2.

    c1: site A sits in the overlap region, site B outside it;
    c2: the roles are swapped.
    """
    l1, l2, l3 = (TOY_SPACE.index(x) for x in ("l1", "l2", "l3"))
    A = np.zeros((2, 2, 3))
    B = np.zeros((2, 2, 3))
    A[0, 0, l3] = A[1, 0, l3] = 1.0  # c1
    B[0, 0, l1] = B[1, 0, l2] = 1.0
    A[0, 1, l1] = A[1, 1, l2] = 1.0  # c2
    B[0, 1, l3] = B[1, 1, l3] = 1.0
    return CCWitness(("c1", "c2"), np.array([0.5, 0.5]), (A, B))


__all__ = [
    "PSI", "PHI", "CCWitness", "IndependenceVerdict", "check_preparation_independence",
    "check_subsystem_condition", "verify_cc_witness", "find_cc_witness", "trivial_witness",
    "toy_witness",
]

"""Maximal epistemic overlap compatible with given statistics.

Two optimisations are provided. :func:`max_overlap_bipartite` searches all
two-site models obeying the subsystem condition. :func:`max_overlap_symmetric`
searches permutation-symmetric n-site models; symmetry is built into the
variables, which are probability masses of S_n-orbits of (preparation,
ontic state) assignments.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, Infeasible, LabelMismatch, NotSymmetric, SearchSpaceTooLarge, ShapeMismatch
from .lp import INFEASIBLE, LinearProgram, LPSolution, lp_solve
from .ontology import PHI, PSI, SUPPORT_TOL, CondDist, EmpiricalModel, OnticSpace, ResponseFunctions, is_symmetric

ORBIT_CAP = 25_000


class OverlapOptimum(NamedTuple):
    omega_star: float
    model: object
    solution: LPSolution


def _aligned_xi(target: EmpiricalModel, responses: ResponseFunctions) -> np.ndarray:
    """Response array with outcomes ordered as in ``target``."""
    if set(target.outcomes) != set(responses.outcomes):
        raise LabelMismatch("target and responses use different outcome labels")
    order = [responses.outcomes.index(o) for o in target.outcomes]
    return np.asarray(responses.xi)[order]


def _check_target(target: EmpiricalModel, tol=1e-9):
    sums = target.table.sum(axis=-1)
    if np.abs(sums - 1.0).max() > tol or target.table.min() < -tol:
        raise DomainError("target rows must be probability distributions")


def _snapped(table: np.ndarray) -> np.ndarray:
    """Round-off sized entries (below the support threshold) become exact zeros."""
    return np.where(np.abs(table) <= SUPPORT_TOL, 0.0, table)


# --- bipartite ----------------------------------------------------------------

def max_overlap_bipartite(target: EmpiricalModel, responses: ResponseFunctions, space: OnticSpace,
                          product_marginals: CondDist | None = None) -> OverlapOptimum:
    """Largest site-A overlap over two-site models reproducing ``target``.

    Variables are mu(lambda_A, lambda_B | p_A, p_B) plus one auxiliary t per
    ontic state bounded by both site-A marginals. ``product_marginals``, a
    single-site CondDist, pins the model to its two-fold product instead.
    Raises :class:`Infeasible` (carrying the Farkas certificate) when no
    model qualifies.
    """
    if target.n != 2 or responses.sites != 2:
        raise ShapeMismatch("bipartite optimisation needs two-site target and responses")
    if any(len(p) != 2 for p in target.prep_labels):
        raise ShapeMismatch("each site needs exactly two preparations")
    _check_target(target)
    xi = _aligned_xi(target, responses)
    target_table = _snapped(target.table)
    L = space.size
    if xi.shape[1:] != (L, L):
        raise ShapeMismatch("responses act on a different ontic space")
    P = 2
    n_mu = P * P * L * L
    nv = n_mu + L

    def mu(a, b, la, lb):
        return ((a * P + b) * L + la) * L + lb

    eq_rows, eq_rhs = [], []

    def row():
        return np.zeros(nv)

    for a, b in itertools.product(range(P), repeat=2):
        r = row()
        for la, lb in itertools.product(range(L), repeat=2):
            r[mu(a, b, la, lb)] = 1.0
        eq_rows.append(r)
        eq_rhs.append(1.0)
        for o in range(len(target.outcomes)):
            r = row()
            for la, lb in itertools.product(range(L), repeat=2):
                r[mu(a, b, la, lb)] = xi[o, la, lb]
            eq_rows.append(r)
            eq_rhs.append(target_table[a, b, o])
    # subsystem condition for both sites
    for a, la in itertools.product(range(P), range(L)):
        r = row()
        for lb in range(L):
            r[mu(a, 0, la, lb)] += 1.0
            r[mu(a, 1, la, lb)] -= 1.0
        eq_rows.append(r)
        eq_rhs.append(0.0)
    for b, lb in itertools.product(range(P), range(L)):
        r = row()
        for la in range(L):
            r[mu(0, b, la, lb)] += 1.0
            r[mu(1, b, la, lb)] -= 1.0
        eq_rows.append(r)
        eq_rhs.append(0.0)
    if product_marginals is not None:
        m = np.asarray(product_marginals.table, dtype=float)
        if m.shape != (P, L):
            raise ShapeMismatch("product marginals must be a single-site table on the same space")
        for a, b, la, lb in itertools.product(range(P), range(P), range(L), range(L)):
            r = row()
            r[mu(a, b, la, lb)] = 1.0
            eq_rows.append(r)
            eq_rhs.append(m[a, la] * m[b, lb])

    ub_rows = []
    for lam in range(L):
        for a in range(P):
            r = row()
            r[n_mu + lam] = 1.0
            for lb in range(L):
                r[mu(a, 0, lam, lb)] -= 1.0
            ub_rows.append(r)
    c = np.zeros(nv)
    c[n_mu:] = 1.0
    lp = LinearProgram.build(c, A_eq=np.array(eq_rows), b_eq=np.array(eq_rhs),
                             A_ub=np.array(ub_rows), b_ub=np.zeros(len(ub_rows)))
    sol = lp_solve(lp)
    if sol.status == INFEASIBLE:
        raise Infeasible("no two-site model reproduces the target with these responses", sol)
    table = np.clip(sol.x[:n_mu], 0.0, None).reshape(P, P, L, L)
    dist = CondDist(space, target.prep_labels, table)
    return OverlapOptimum(float(sol.value), dist, sol)


# --- symmetric orbit tables ---------------------------------------------------

def _compositions(total: int, parts: int):
    """Count vectors of length ``parts`` summing to ``total``, descending lex order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def orbit_count(n: int, p_count: int, lambda_count: int) -> int:
    k = p_count * lambda_count
    return math.comb(n + k - 1, k - 1)


@dataclass(frozen=True, eq=False)
class SymmetricTypeTable:
    """Symmetric n-site distribution over two preparations stored per orbit.

    An orbit is fixed by the class ``k`` (number of psi sites) and two count
    vectors: ``psi_counts`` over the psi sites and ``phi_counts`` over the phi
    sites. ``values[i]`` is the total mass of orbit ``i`` in the
    representative context (psi on the first k sites, phi on the rest).
    """

    n: int
    space: OnticSpace
    values: np.ndarray
    prep_labels: tuple = (PSI, PHI)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.orbits()[0]),):
            raise ShapeMismatch("one value per orbit required")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "prep_labels", tuple(self.prep_labels))

    def orbits(self):
        return _orbit_arrays(self.n, self.space.size)

    def orbit_sizes(self) -> np.ndarray:
        return _orbit_sizes(self.n, self.space.size)

    def class_totals(self) -> np.ndarray:
        _, _, k = self.orbits()
        return np.bincount(k, weights=self.values, minlength=self.n + 1)

    def expand(self) -> CondDist:
        """Dense CondDist (small n only)."""
        n, L = self.n, self.space.size
        if n > 6:
            raise SearchSpaceTooLarge("dense expansion is limited to n <= 6")
        index = _orbit_index(n, L)
        sizes = self.orbit_sizes()
        table = np.zeros((2,) * n + (L,) * n)
        for preps in itertools.product(range(2), repeat=n):
            for lam in itertools.product(range(L), repeat=n):
                i = index[_key(preps, lam, L)]
                table[preps + lam] = self.values[i] / sizes[i]
        return CondDist(self.space, (self.prep_labels,) * n, table)

    @classmethod
    def compress(cls, dist: CondDist, tol=1e-9) -> "SymmetricTypeTable":
        """Orbit masses of a symmetric CondDist with two preparations per site."""
        if any(len(p) != 2 for p in dist.prep_labels):
            raise ShapeMismatch("two preparations per site required")
        if not is_symmetric(dist, tol):
            raise NotSymmetric("distribution is not permutation symmetric")
        n, L = dist.n, dist.space.size
        index = _orbit_index(n, L)
        values = np.zeros(len(index))
        for k in range(n + 1):
            preps = (0,) * k + (1,) * (n - k)
            for lam in itertools.product(range(L), repeat=n):
                values[index[_key(preps, lam, L)]] += dist.table[preps + lam]
        return cls(n, dist.space, values, dist.prep_labels[0])


def _key(preps, lam, L):
    a, b = [0] * L, [0] * L
    for p, x in zip(preps, lam):
        (a if p == 0 else b)[x] += 1
    return tuple(a), tuple(b)


_ORBIT_CACHE = {}


def _orbit_arrays(n: int, L: int):
    """(psi_counts, phi_counts, k) arrays in canonical orbit order."""
    key = (n, L)
    if key not in _ORBIT_CACHE:
        a_rows, b_rows, ks = [], [], []
        for k in range(n, -1, -1):
            for a in _compositions(k, L):
                for b in _compositions(n - k, L):
                    a_rows.append(a)
                    b_rows.append(b)
                    ks.append(k)
        _ORBIT_CACHE[key] = (np.array(a_rows, dtype=np.int64).reshape(-1, L),
                             np.array(b_rows, dtype=np.int64).reshape(-1, L),
                             np.array(ks, dtype=np.int64))
    return _ORBIT_CACHE[key]


def _orbit_index(n, L):
    a, b, _ = _orbit_arrays(n, L)
    return {(tuple(int(v) for v in ra), tuple(int(v) for v in rb)): i for i, (ra, rb) in enumerate(zip(a, b))}


def _multinomial(counts) -> float:
    out = math.factorial(int(sum(counts)))
    for c in counts:
        out //= math.factorial(int(c))
    return out


def _orbit_sizes(n, L):
    a, b, _ = _orbit_arrays(n, L)
    return np.array([_multinomial(x) * _multinomial(y) for x, y in zip(a, b)], dtype=float)


def _draw_prob(counts: np.ndarray, total: np.ndarray, seq) -> np.ndarray:
    """Probability of drawing the ordered sequence ``seq`` without replacement.

    ``counts`` is (orbits, L); ``total`` the per-orbit group size.
    """
    p = np.ones(counts.shape[0])
    used = {}
    for j, lam in enumerate(seq):
        have = counts[:, lam] - used.get(lam, 0)
        left = total - j
        with np.errstate(divide="ignore", invalid="ignore"):
            p = p * np.where(left > 0, np.clip(have, 0, None) / np.where(left > 0, left, 1), 0.0)
        used[lam] = used.get(lam, 0) + 1
    return p


def _pattern_marginal(a, b, k, n, pattern, lam):
    """P(first m sites carry ``lam``) per orbit when their preparations are ``pattern``."""
    psi_seq = [x for p, x in zip(pattern, lam) if p == 0]
    phi_seq = [x for p, x in zip(pattern, lam) if p == 1]
    return _draw_prob(a, k, psi_seq) * _draw_prob(b, n - k, phi_seq)


def _symmetric_lp(n, m, target, xi, L, fixed_marginals=None):
    a, b, k = _orbit_arrays(n, L)
    n_orb = len(k)
    nv = n_orb + L
    eq_rows, eq_rhs = [], []
    for cls in range(n + 1):
        r = np.zeros(nv)
        r[:n_orb] = (k == cls)
        eq_rows.append(r)
        eq_rhs.append(1.0)

    def site_marginal(cls, psi_site):
        """Rows (L, nv) giving one site's marginal inside class ``cls``."""
        out = np.zeros((L, nv))
        mask = k == cls
        if psi_site:
            out[:, :n_orb] = (a * mask[:, None]).T / cls
        else:
            out[:, :n_orb] = (b * mask[:, None]).T / (n - cls)
        return out

    ref_psi, ref_phi = site_marginal(n, True), site_marginal(0, False)
    for cls in range(1, n):
        for rows, ref in ((site_marginal(cls, True), ref_psi), (site_marginal(cls, False), ref_phi)):
            for lam in range(L):
                eq_rows.append(rows[lam] - ref[lam])
                eq_rhs.append(0.0)
    if fixed_marginals is not None:
        fm = np.asarray(fixed_marginals.table, dtype=float)
        for lam in range(L):
            eq_rows.append(ref_psi[lam])
            eq_rhs.append(fm[0, lam])
            eq_rows.append(ref_phi[lam])
            eq_rhs.append(fm[1, lam])

    lam_tuples = list(itertools.product(range(L), repeat=m))
    n_out = xi.shape[0]
    xi_flat = xi.reshape(n_out, -1)
    for pattern in itertools.product(range(2), repeat=m):
        j = pattern.count(0)
        probs = np.stack([_pattern_marginal(a, b, k, n, pattern, lam) for lam in lam_tuples], axis=1)
        contrib = probs @ xi_flat.T  # (orbits, outcomes)
        for cls in range(n + 1):
            if j > cls or m - j > n - cls:
                continue
            mask = (k == cls)
            # implied row: mass lost to unnormalised responses must vanish
            short = np.zeros(nv)
            short[:n_orb] = _snapped((1.0 - contrib.sum(axis=1)) * mask)
            gap = 1.0 - float(np.sum(target[pattern]))
            gap = 0.0 if abs(gap) <= 1e-12 else gap
            if short.any() or gap:
                eq_rows.append(short)
                eq_rhs.append(gap)
            for o in range(n_out):
                r = np.zeros(nv)
                r[:n_orb] = contrib[:, o] * mask
                eq_rows.append(r)
                eq_rhs.append(target[pattern + (o,)])

    ub_rows = []
    for lam in range(L):
        for ref in (ref_psi, ref_phi):
            r = -ref[lam].copy()
            r[n_orb + lam] = 1.0
            ub_rows.append(r)
    c = np.zeros(nv)
    c[n_orb:] = 1.0
    return LinearProgram.build(c, A_eq=np.array(eq_rows), b_eq=np.array(eq_rhs),
                               A_ub=np.array(ub_rows), b_ub=np.zeros(len(ub_rows)))


def _check_symmetric_inputs(n, m, target, responses, space, cap):
    if not 1 <= m < n:
        raise DomainError("need 1 <= m < n")
    if target.n != m or responses.sites != m:
        raise ShapeMismatch("target and responses must act on m sites")
    if any(len(p) != 2 for p in target.prep_labels):
        raise ShapeMismatch("two preparations per site required")
    _check_target(target)
    count = orbit_count(n, 2, space.size)
    if count > cap:
        raise SearchSpaceTooLarge(f"{count} orbit variables exceed the cap of {cap}")
    xi = _aligned_xi(target, responses)
    if xi.shape[1:] != (space.size,) * m:
        raise ShapeMismatch("responses act on a different ontic space")
    return xi


def max_overlap_symmetric(n: int, m: int, target: EmpiricalModel, responses: ResponseFunctions,
                          space: OnticSpace, cap: int = ORBIT_CAP,
                          fixed_marginals: CondDist | None = None) -> OverlapOptimum:
    """Largest single-site overlap over symmetric n-site models.

    Constraints: per-class normalisation, the subsystem condition across
    classes, and reproduction of ``target`` by the first m sites for every
    joint preparation. Raises :class:`Infeasible` with a verified Farkas
    certificate when no symmetric model reproduces ``target``.
    """
    xi = _check_symmetric_inputs(n, m, target, responses, space, cap)
    lp = _symmetric_lp(n, m, _snapped(target.table), xi, space.size, fixed_marginals)
    sol = lp_solve(lp)
    if sol.status == INFEASIBLE:
        raise Infeasible(f"no symmetric {n}-site model reproduces the target", sol)
    n_orb = orbit_count(n, 2, space.size)
    table = SymmetricTypeTable(n, space, np.clip(sol.x[:n_orb], 0.0, None), target.prep_labels[0])
    return OverlapOptimum(float(sol.value), table, sol)


def reproduction_residual(table: SymmetricTypeTable, m: int, target: EmpiricalModel,
                          responses: ResponseFunctions) -> float:
    """Max deviation of the first-m-site statistics of ``table`` from ``target``."""
    L = table.space.size
    xi = _aligned_xi(target, responses).reshape(len(target.outcomes), -1)
    a, b, k = table.orbits()
    lam_tuples = list(itertools.product(range(L), repeat=m))
    worst = 0.0
    for pattern in itertools.product(range(2), repeat=m):
        j = pattern.count(0)
        probs = np.stack([_pattern_marginal(a, b, k, table.n, pattern, lam) for lam in lam_tuples], axis=1)
        contrib = (probs @ xi.T) * table.values[:, None]
        for cls in range(table.n + 1):
            if j > cls or m - j > table.n - cls:
                continue
            got = contrib[k == cls].sum(axis=0)
            worst = max(worst, float(np.abs(got - target.table[pattern]).max()))
    return worst


@dataclass(frozen=True)
class SweepRow:
    n: int
    m: int
    lambda_count: int
    omega_star: float
    bound: float
    lp_status: str
    wall_ms: int
    pivots: int


def symmetric_sweep_point(n, m, target, responses, space, bound, cap=ORBIT_CAP) -> SweepRow:
    """One sweep point; a certified infeasible LP gives ``omega_star = -inf``.

    -inf is the supremum of the overlap over an empty set of models, so the
    bound comparison and monotonicity checks remain meaningful.
    """
    start = time.perf_counter()
    try:
        opt = max_overlap_symmetric(n, m, target, responses, space, cap)
        value, status, pivots = opt.omega_star, opt.solution.status, opt.solution.pivots
    except Infeasible as exc:
        value, status, pivots = -math.inf, INFEASIBLE, exc.solution.pivots
    wall = int(round(1000 * (time.perf_counter() - start)))
    return SweepRow(n, m, space.size, value, bound, status, wall, pivots)


__all__ = [
    "ORBIT_CAP", "OverlapOptimum", "SweepRow", "SymmetricTypeTable", "lp_solve",
    "max_overlap_bipartite", "max_overlap_symmetric", "orbit_count", "reproduction_residual",
    "symmetric_sweep_point",
]

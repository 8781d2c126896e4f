"""Finite de Finetti bounds and constructive i.i.d.-mixture witnesses."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, IllDefinedMarginal, NotSymmetric
from .independence import check_subsystem_condition
from .lp import LinearProgram, lp_solve
from .ontology import CondDist, conditional_distance, is_symmetric, marginal_sites, single_site

LP_TOL = 1e-7


@dataclass(frozen=True)
class BoundInputs:
    n: int
    m: int
    p_count: int
    lambda_count: int

    def __post_init__(self):
        for name in ("n", "m", "p_count", "lambda_count"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise DomainError(f"{name} must be an integer")
        if not 1 <= self.m < self.n:
            raise DomainError(f"need 1 <= m < n, got m={self.m}, n={self.n}")
        if self.p_count < 1 or self.lambda_count < 1:
            raise DomainError("p_count and lambda_count must be positive")


def _ct_exact(b: BoundInputs) -> Fraction:
    first = Fraction(2 * b.m * b.p_count * b.lambda_count ** b.p_count, b.n)
    second = Fraction(b.p_count * b.m * (b.m - 1), b.n)
    return min(first, second)


def ct_bound(b: BoundInputs) -> float:
    """min(2 m |P| |Lambda|^|P| / n, |P| m (m - 1) / n), evaluated exactly then rounded."""
    return float(_ct_exact(b))


def theorem3_bound(n: int, m: int, lambda_count: int) -> float:
    """Overlap bound min(4 m |Lambda|^2 / n, 2 m (m - 1) / n) for two preparations."""
    BoundInputs(n, m, 2, lambda_count)
    exact = min(Fraction(4 * m * lambda_count ** 2, n), Fraction(2 * m * (m - 1), n))
    return float(exact)


def simplex_grid(size: int, denominator: int) -> np.ndarray:
    """All distributions on ``size`` points with entries in (1/denominator) Z."""
    if denominator < 1:
        raise DomainError("grid denominator must be positive")
    pts = []

    def rec(prefix, left, slots):
        if slots == 1:
            pts.append(prefix + (left,))
            return
        for v in range(left, -1, -1):
            rec(prefix + (v,), left - v, slots - 1)

    rec((), denominator, size)
    return np.array(pts, dtype=float) / denominator


@dataclass(frozen=True, eq=False)
class MixtureWitness:
    """Finite mixture of m-fold products of single-site conditionals."""

    components: tuple  # of (weight, CondDist)
    achieved_distance: float
    grid_resolution: int
    m: int
    columns_priced: int = 0

    def table(self) -> np.ndarray:
        return _mixture_table([w for w, _ in self.components],
                              [c.table for _, c in self.components], self.m)


def _product_tables(V: np.ndarray, m: int) -> np.ndarray:
    """Batch of m-fold products: V (k, P, L) -> (k, P^m..., L^m...) as (k, P..., L...)."""
    k, P, L = V.shape
    out = V
    for _ in range(1, m):
        out = out[..., None, None] * V.reshape((k,) + (1,) * (out.ndim - 1) + (P, L))
    # axes are (k, p1, l1, p2, l2, ...): regroup preparations first
    order = [0] + [1 + 2 * i for i in range(m)] + [2 + 2 * i for i in range(m)]
    return np.transpose(out, order)


def _mixture_table(weights, tables, m):
    V = np.stack([np.asarray(t) for t in tables])
    prods = _product_tables(V, m)
    return np.tensordot(np.asarray(weights, dtype=float), prods, axes=1)


def _check_sigma(sigma: CondDist, m: int, tol=1e-9):
    if not 1 <= m < sigma.n:
        raise DomainError("need 1 <= m < n")
    if not is_symmetric(sigma, tol):
        raise NotSymmetric("sigma is not permutation symmetric")
    verdict = check_subsystem_condition(sigma, tol)
    if not verdict.holds:
        ctx = verdict.witness_context or {}
        raise IllDefinedMarginal(
            f"subsystem condition fails (discrepancy {verdict.max_violation:.3g})",
            site=ctx.get("site"), contexts=ctx.get("contexts"), discrepancy=verdict.max_violation,
        )


def best_iid_mixture(sigma: CondDist, m: int, grid_resolution: int = 16,
                     batch: int = 8192, max_rounds: int = 500) -> MixtureWitness:
    """Closest mixture of m-fold i.i.d. products to sigma's m-site marginal.

    Components range over every single-site conditional whose rows lie on the
    simplex grid of the given denominator. The LP minimises the largest
    per-context trace distance and is solved by column generation: the
    restricted problem is re-solved with the columns whose reduced cost is
    positive until none remain, which certifies optimality over the whole
    grid. ``achieved_distance`` is recomputed from the returned weights.
    """
    _check_sigma(sigma, m)
    target = marginal_sites(sigma, tuple(range(m))).table
    P = sigma.prep_shape[0]
    L = sigma.space.size
    grid = simplex_grid(L, grid_resolution)
    G = len(grid)
    n_comp = G ** P
    cells = target.size
    flat_target = target.ravel()

    def component(j):
        idx = np.unravel_index(j, (G,) * P)
        return grid[list(idx)]

    def columns(js):
        V = np.stack([component(j) for j in js])
        return _product_tables(V, m).reshape(len(js), cells)

    # seed with the grid point nearest to the single-site marginal
    single = marginal_sites(sigma, (0,)).table
    seed = np.ravel_multi_index(tuple(int(np.argmin(np.abs(grid - row).sum(axis=1))) for row in single),
                                (G,) * P)
    active = [int(seed)]
    priced = 0
    n_ctx = int(np.prod(target.shape[:m]))
    per_ctx = cells // n_ctx
    for _ in range(max_rounds):
        Q = columns(active)  # (k, cells)
        k = len(active)
        nv = k + cells + 1
        c = np.zeros(nv)
        c[-1] = -1.0
        ub = np.zeros((2 * cells + n_ctx, nv))
        ub[:cells, :k] = Q.T
        ub[:cells, k:k + cells] = -np.eye(cells)
        ub[cells:2 * cells, :k] = -Q.T
        ub[cells:2 * cells, k:k + cells] = -np.eye(cells)
        for p in range(n_ctx):
            ub[2 * cells + p, k + p * per_ctx:k + (p + 1) * per_ctx] = 1.0
            ub[2 * cells + p, -1] = -2.0
        b_ub = np.concatenate([flat_target, -flat_target, np.zeros(n_ctx)])
        eq = np.zeros((1, nv))
        eq[0, :k] = 1.0
        sol = lp_solve(LinearProgram.build(c, A_eq=eq, b_eq=[1.0], A_ub=ub, b_ub=b_ub))
        y_eq = sol.dual_eq[0]
        u = sol.dual_ub[:cells] - sol.dual_ub[cells:2 * cells]
        best, best_j = [], []
        for start in range(0, n_comp, batch):
            js = np.arange(start, min(start + batch, n_comp))
            red = -y_eq - columns(js) @ u
            priced += len(js)
            hit = np.flatnonzero(red > 1e-9)
            best.extend(red[hit])
            best_j.extend(js[hit])
        fresh = [int(j) for r, j in sorted(zip(best, best_j), key=lambda t: (-t[0], t[1]))
                 if int(j) not in active][:20]
        if not fresh:
            break
        active.extend(fresh)
    weights = np.clip(sol.x[:k], 0.0, None)
    keep = np.flatnonzero(weights > 1e-12)
    weights = weights[keep] / weights[keep].sum()
    comps = []
    for w, j in zip(weights, np.array(active)[keep]):
        rows = component(int(j))
        comps.append((float(w), single_site(sigma.space, dict(zip(sigma.prep_labels[0], rows)))))
    table = _mixture_table([w for w, _ in comps], [cd.table for _, cd in comps], m)
    dist = conditional_distance(table, target, m)
    return MixtureWitness(tuple(comps), dist, grid_resolution, m, priced)


def iid_power(single: CondDist, n: int) -> CondDist:
    """n-fold product of one single-site conditional."""
    table = _product_tables(single.table[None], n)[0]
    return CondDist(single.space, single.prep_labels * n, table)


def bound_rows(ns, m: int, lambda_count: int, p_count: int = 2, distances=None) -> list:
    """Rows (n, m, lambda_count, eq11_bound, eq14_bound, achieved_distance)."""
    distances = distances or {}
    rows = []
    for n in ns:
        b = BoundInputs(n, m, p_count, lambda_count)
        pair = theorem3_bound(n, m, lambda_count) if p_count == 2 else None
        rows.append((n, m, lambda_count, ct_bound(b), pair, distances.get(n)))
    return rows


__all__ = [
    "BoundInputs", "MixtureWitness", "ct_bound", "theorem3_bound", "best_iid_mixture",
    "simplex_grid", "iid_power", "bound_rows", "LP_TOL",
]

"""Independent reference implementations used to cross-check the library.

Nothing here calls the simplex code: LPs are solved by enumerating every
basic solution, and realisability by brute force over assignments.
"""

import itertools
import math

import numpy as np


def vertex_optimum(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lo=None, hi=None, tol=1e-9):
    """max c.x over a bounded polytope by enumerating all vertices.

    Returns ``(value, x)`` or ``(None, None)`` when the polytope is empty.
    Every variable must have finite bounds ``lo <= x <= hi``.
    """
    c = np.asarray(c, float)
    n = c.size
    rows, rhs = [], []
    if A_ub is not None:
        rows.extend(np.asarray(A_ub, float))
        rhs.extend(np.asarray(b_ub, float))
    if A_eq is not None:
        for a, b in zip(np.asarray(A_eq, float), np.asarray(b_eq, float)):
            rows.extend([a, -a])
            rhs.extend([b, -b])
    lo = np.zeros(n) if lo is None else np.asarray(lo, float)
    hi = np.asarray(hi, float)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.extend([e, -e])
        rhs.extend([hi[j], -lo[j]])
    G, h = np.array(rows), np.array(rhs)
    best, arg = None, None
    for idx in itertools.combinations(range(len(G)), n):
        sub = G[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, h[list(idx)])
        if np.all(G @ x <= h + tol):
            v = float(c @ x)
            if best is None or v > best:
                best, arg = v, x
    return best, arg


def min_overlap(p, q):
    """Summed pointwise minimum of two distributions."""
    return float(np.minimum(np.asarray(p, float), np.asarray(q, float)).sum())


def half_l1_overlap(p, q):
    """1 - half the L1 distance, computed without any minimum."""
    return 1.0 - 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def deterministic_tables():
    """All 16 local deterministic strategies of a two-party, two-setting, binary scenario.

    Each entry is ``p[a, b, x, y]``.
    """
    out = []
    for a0, a1, b0, b1 in itertools.product(range(2), repeat=4):
        p = np.zeros((2, 2, 2, 2))
        for x, y in itertools.product(range(2), repeat=2):
            p[(a0, a1)[x], (b0, b1)[y], x, y] = 1.0
        out.append(p)
    return out


def chsh_local(p, tol=1e-9):
    """Local iff no-signalling and all eight CHSH inequalities hold."""
    p = np.asarray(p, float)
    pa = p.sum(axis=1)  # (a, x, y)
    pb = p.sum(axis=0)  # (b, x, y)
    if np.abs(pa[:, :, 0] - pa[:, :, 1]).max() > tol or np.abs(pb[:, 0, :] - pb[:, 1, :]).max() > tol:
        return False
    sign = np.array([1.0, -1.0])
    E = np.einsum("a,b,abxy->xy", sign, sign, p)
    for flip in itertools.product(range(2), repeat=2):
        s = E[0, 0] + E[0, 1] + E[1, 0] + E[1, 1] - 2 * E[flip]
        if abs(s) > 2 + tol:
            return False
    return True


def falling_draw(counts, seq):
    """Probability of drawing ``seq`` without replacement from an urn with ``counts``."""
    counts = list(counts)
    total = sum(counts)
    prob = 1.0
    for s in seq:
        if total == 0 or counts[s] == 0:
            return 0.0
        prob *= counts[s] / total
        counts[s] -= 1
        total -= 1
    return prob


def multiset_count(n, k):
    return math.comb(n + k - 1, k - 1)

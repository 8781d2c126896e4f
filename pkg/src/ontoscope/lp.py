"""Dense two-phase simplex with Bland's anti-cycling rule.

Problems are stated as

    maximize    c @ x
    subject to  A_eq @ x == b_eq
                A_ub @ x <= b_ub
                lo <= x <= hi

and internally rewritten in standard form ``A z = b, z >= 0`` with ``b >= 0``.
Every returned solution carries a certificate that has been checked by
re-substitution before the function returns: primal/dual multipliers for
``Optimal``, a Farkas vector for ``Infeasible`` and an improving ray for
``Unbounded``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBreakdown

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"

PRIMAL_TOL = 1e-7
SLACKNESS_TOL = 1e-6
_COST_TOL = 1e-9
_PIVOT_TOL = 1e-9
_REINVERT_EVERY = 64
FARKAS_SLACK = 1e-9
FARKAS_GAP = 1e-6
_PRESOLVE_REL = 1e-9


def _as_matrix(A, n):
    if A is None:
        return np.zeros((0, n))
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    return A


def _as_vector(b, m):
    if b is None:
        return np.zeros(m)
    return np.atleast_1d(np.asarray(b, dtype=float))


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    bounds: np.ndarray

    @classmethod
    def build(cls, c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, bounds=None):
        """Assemble an LP; ``bounds`` defaults to ``[0, inf)`` for every variable.

        ``bounds`` may be a single ``(lo, hi)`` pair applied to all variables or
        an ``(n, 2)`` array. ``None`` entries mean unbounded on that side.
        """
        c = np.asarray(c, dtype=float).ravel()
        n = c.size
        A_eq = _as_matrix(A_eq, n)
        A_ub = _as_matrix(A_ub, n)
        b_eq = _as_vector(b_eq, A_eq.shape[0])
        b_ub = _as_vector(b_ub, A_ub.shape[0])
        if bounds is None:
            bnd = np.tile([0.0, np.inf], (n, 1))
        else:
            raw = np.array(bounds, dtype=object)
            if raw.ndim == 1:
                raw = np.tile(raw, (n, 1))
            bnd = np.empty((n, 2))
            for j in range(n):
                lo, hi = raw[j]
                bnd[j, 0] = -np.inf if lo is None else float(lo)
                bnd[j, 1] = np.inf if hi is None else float(hi)
        lp = cls(c, A_eq, b_eq, A_ub, b_ub, bnd)
        lp.check()
        return lp

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def check(self):
        n = self.n_vars
        if self.A_eq.shape[1] != n or self.A_ub.shape[1] != n:
            raise ValueError("constraint matrices do not match the objective length")
        if self.A_eq.shape[0] != self.b_eq.size or self.A_ub.shape[0] != self.b_ub.size:
            raise ValueError("right-hand side length mismatch")
        if self.bounds.shape != (n, 2) or np.any(self.bounds[:, 0] > self.bounds[:, 1]):
            raise ValueError("bounds must satisfy lo <= hi")
        for arr in (self.objective, self.A_eq, self.b_eq, self.A_ub, self.b_ub):
            if np.isnan(arr).any() or np.isinf(arr).any():
                raise ValueError("LP data must be finite")

    def residuals(self, x) -> dict:
        """Constraint violations of ``x`` (all zero for a feasible point)."""
        x = np.asarray(x, dtype=float)
        eq = np.abs(self.A_eq @ x - self.b_eq).max(initial=0.0)
        ub = np.maximum(self.A_ub @ x - self.b_ub, 0.0).max(initial=0.0)
        lo = np.maximum(self.bounds[:, 0] - x, 0.0).max(initial=0.0)
        hi = np.maximum(x - self.bounds[:, 1], 0.0).max(initial=0.0)
        return {"eq": float(eq), "ub": float(ub), "bounds": float(max(lo, hi))}


@dataclass(frozen=True)
class LPSolution:
    """Result of :func:`lp_solve`.

    For ``Optimal`` the duals satisfy ``c - A_eq.T @ dual_eq - A_ub.T @ dual_ub
    <= 0`` on variables at their lower bound of zero (``dual_ub >= 0``).
    For ``Infeasible`` the duals form a Farkas certificate of the standard
    form and ``farkas`` holds ``(y, A_std, b_std)`` for re-checking.
    """

    status: str
    value: float | None
    x: np.ndarray | None
    dual_eq: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    ray: np.ndarray | None = None
    pivots: int = 0
    residuals: dict = field(default_factory=dict)
    farkas: tuple | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Standard:
    """Standard-form rewrite of a LinearProgram and the map back."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        lo, hi = lp.bounds[:, 0], lp.bounds[:, 1]
        cols = []  # (var, coefficient)
        shift = np.zeros(n)
        upper_rows = []  # (std column, width)
        for j in range(n):
            if np.isfinite(lo[j]):
                shift[j] = lo[j]
                cols.append((j, 1.0))
                if np.isfinite(hi[j]):
                    upper_rows.append((len(cols) - 1, hi[j] - lo[j]))
            elif np.isfinite(hi[j]):
                shift[j] = hi[j]
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        n0 = len(cols)
        T = np.zeros((n, n0))
        for k, (j, s) in enumerate(cols):
            T[j, k] = s
        self.T, self.shift, self.n0 = T, shift, n0

        m_eq, m_ub, m_bd = lp.A_eq.shape[0], lp.A_ub.shape[0], len(upper_rows)
        bnd = np.zeros((m_bd, n0))
        for r, (k, _) in enumerate(upper_rows):
            bnd[r, k] = 1.0
        M = np.vstack([lp.A_eq @ T, lp.A_ub @ T, bnd])
        rhs = np.concatenate([
            lp.b_eq - lp.A_eq @ shift,
            lp.b_ub - lp.A_ub @ shift,
            np.array([w for _, w in upper_rows]),
        ])
        m_slack = m_ub + m_bd
        S = np.zeros((M.shape[0], m_slack))
        S[m_eq:, :] = np.eye(m_slack)
        A = np.hstack([M, S])
        sign = np.where(rhs < 0, -1.0, 1.0)
        self.A = A * sign[:, None]
        self.b = rhs * sign
        self.sign = sign
        self.c = np.concatenate([lp.objective @ T, np.zeros(m_slack)])
        self.const = float(lp.objective @ shift)
        self.m_eq, self.m_ub, self.m_bd = m_eq, m_ub, m_bd

    def to_x(self, z):
        return self.shift + self.T @ z[: self.n0]

    def split_duals(self, y):
        y = y * self.sign
        return y[: self.m_eq], y[self.m_eq: self.m_eq + self.m_ub]


class _Tableau:
    """Dense simplex tableau ``B^-1 A`` with basic values and reduced costs."""

    def __init__(self, A, b, c, basis, rows=None):
        self.A0, self.b0, self.c = A, b, c
        self.basis = list(basis)
        self.rows = list(range(A.shape[0])) if rows is None else list(rows)
        self.pivots = 0
        self.reinvert()

    def basis_matrix(self):
        return self.A0[np.ix_(self.rows, self.basis)]

    def reinvert(self):
        A, b = self.A0[self.rows], self.b0[self.rows]
        if not self.basis:
            self.tab = np.zeros((0, A.shape[1]))
            self.beta = np.zeros(0)
            self.y = np.zeros(0)
            self.d = self.c.copy()
            return
        B = A[:, self.basis]
        self.tab = np.linalg.solve(B, A)
        self.beta = np.linalg.solve(B, b)
        self.y = np.linalg.solve(B.T, self.c[self.basis])
        self.d = self.c - A.T @ self.y
        self.d[self.basis] = 0.0

    def pivot(self, r, j):
        tab = self.tab
        piv = tab[r, j]
        row = tab[r] / piv
        beta_r = self.beta[r] / piv
        col = tab[:, j].copy()
        col[r] = 0.0
        tab -= np.outer(col, row)
        tab[r] = row
        self.beta -= col * beta_r
        self.beta[r] = beta_r
        self.d -= self.d[j] * row
        self.d[j] = 0.0
        self.basis[r] = j
        self.pivots += 1
        if self.pivots % _REINVERT_EVERY == 0:
            self.reinvert()

    def drop_row(self, r, row=None):
        """Remove basis position ``r`` and constraint ``row`` (defaults to ``rows[r]``)."""
        del self.rows[self.rows.index(self.rows[r] if row is None else row)]
        del self.basis[r]
        self.reinvert()

    def entering(self, ncols):
        """Bland: lowest-index column with a positive reduced cost."""
        cand = np.flatnonzero(self.d[:ncols] > _COST_TOL)
        return int(cand[0]) if cand.size else None

    def leaving(self, j):
        """Minimum-ratio row; ties go to the lowest basic variable index."""
        col = self.tab[:, j]
        rows = np.flatnonzero(col > _PIVOT_TOL)
        if rows.size == 0:
            return None
        ratios = np.maximum(self.beta[rows], 0.0) / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * (1.0 + best)]
        return int(min(tied, key=lambda r: self.basis[r]))

    def run(self, ncols, max_pivots):
        while True:
            j = self.entering(ncols)
            if j is None:
                self.reinvert()
                j = self.entering(ncols)
                if j is None:
                    return OPTIMAL, None
            r = self.leaving(j)
            if r is None:
                return UNBOUNDED, j
            self.pivot(r, j)
            if self.pivots > max_pivots:
                raise NumericalBreakdown(
                    "pivot limit exceeded", {"pivots": self.pivots, "rows": len(self.rows)}
                )


def _diagnostics(tab):
    B = tab.basis_matrix()
    cond = float(np.linalg.cond(B)) if B.size else 1.0
    return {"condition_number": cond, "pivots": tab.pivots, "rows": len(tab.rows)}


def lp_solve(lp: LinearProgram, max_pivots: int | None = None, presolve: bool = True) -> LPSolution:
    """Solve ``lp`` by two-phase simplex with Bland's pivot rule.

    Output is a deterministic function of the input arrays. Certificates are
    verified before returning; a failed verification raises
    :class:`NumericalBreakdown` rather than returning a wrong answer.

    With ``presolve`` every equality row with zero right-hand side whose
    coefficients on the remaining variables are all nonnegative fixes the
    variables it touches at zero (repeated until nothing changes). The
    reduced problem is solved and its certificates are lifted back to, and
    re-verified on, the full problem.
    """
    lp.check()
    try:
        return _lp_solve(lp, max_pivots, presolve)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"singular basis ({exc})", {}) from exc


def _lp_solve(lp, max_pivots, presolve):
    stages = _presolve(lp) if presolve else []
    if not stages:
        return _solve(lp, max_pivots)
    fixed = np.zeros(lp.n_vars, dtype=bool)
    for _, cols in stages:
        fixed[cols] = True
    keep = ~fixed
    reduced = LinearProgram(lp.objective[keep], lp.A_eq[:, keep], lp.b_eq,
                            lp.A_ub[:, keep], lp.b_ub, lp.bounds[keep])
    sol = _solve(reduced, max_pivots)
    return _lift(lp, sol, keep, stages)


def _presolve(lp: LinearProgram) -> list:
    """Stages ``(row, columns)`` of variables forced to zero, in discovery order.

    Only rows whose right-hand side is exactly zero and whose nonzero
    coefficients are all clearly positive qualify.
    """
    A, b = lp.A_eq, lp.b_eq
    zero_lb = (lp.bounds[:, 0] == 0.0) & np.isinf(lp.bounds[:, 1])
    alive = np.ones(lp.n_vars, dtype=bool)
    candidates = np.flatnonzero(b == 0.0)
    stages = []
    changed = True
    while changed:
        changed = False
        for r in candidates:
            row = A[r]
            live = alive & (row != 0.0)
            if not live.any() or (row[live] < 0).any() or not zero_lb[live].all():
                continue
            # round-off sized coefficients make the deduction unreliable
            if row[live].min() <= _PRESOLVE_REL * row[live].max():
                continue
            cols = np.flatnonzero(live)
            alive[cols] = False
            stages.append((int(r), cols))
            changed = True
    if not alive.any():
        return []
    return stages


def _absorb(q, y_eq, A_eq, stages):
    """Add multiples of presolve rows so that ``q`` is nonnegative on fixed columns.

    ``q`` changes by ``alpha * A_eq[r]`` when ``y_eq[r]`` grows by ``alpha``.
    A stage row only touches its own columns and columns fixed earlier, so a
    reverse sweep settles every column. Rows have zero right-hand side, so
    objective and Farkas gap are unchanged.
    """
    for r, cols in reversed(stages):
        need = -q[cols] / A_eq[r, cols]
        alpha = max(0.0, float(need.max())) * (1.0 + 1e-9) + (1e-12 if need.max() > 0 else 0.0)
        if alpha > 0.0:
            q = q + alpha * A_eq[r]
            y_eq = y_eq.copy()
            y_eq[r] += alpha
    return q, y_eq


def _lift(lp, sol, keep, stages):
    n = lp.n_vars

    def widen(v):
        out = np.zeros(n)
        out[keep] = v
        return out

    if sol.status == UNBOUNDED:
        return LPSolution(UNBOUNDED, sol.value, None, ray=widen(sol.ray), pivots=sol.pivots,
                          residuals=sol.residuals)
    if sol.status == OPTIMAL:
        x = widen(sol.x)
        q = lp.A_eq.T @ sol.dual_eq + lp.A_ub.T @ sol.dual_ub - lp.objective
        q, y_eq = _absorb(q, sol.dual_eq, lp.A_eq, stages)
        res = dict(sol.residuals)
        res.update({f"orig_{k}": v for k, v in lp.residuals(x).items()})
        res["dual"] = float(max(0.0, -q[~keep].min(initial=0.0), -q[keep].min(initial=0.0)))
        if res["dual"] > PRIMAL_TOL or max(lp.residuals(x).values()) > PRIMAL_TOL:
            raise NumericalBreakdown("lifted optimal solution failed verification", res)
        return LPSolution(OPTIMAL, float(lp.objective @ x), x, y_eq, sol.dual_ub,
                          pivots=sol.pivots, residuals=res)
    # Farkas: lift the standard-form multiplier vector; fixed variables have
    # bounds [0, inf) and hence exactly one standard-form column each
    std = _Standard(lp)
    std_col = {int(j): int(k) for j, k in zip(*np.nonzero(std.T))}
    stages_std = [(r, np.array([std_col[int(j)] for j in cols])) for r, cols in stages]
    A_signed = std.A
    q, y_full = _absorb(A_signed.T @ sol.farkas[0], sol.farkas[0], A_signed, stages_std)
    y_full, worst, gap = _checked_farkas(y_full, std.A, std.b)
    if y_full is None:
        raise NumericalBreakdown("lifted Farkas certificate failed verification",
                                 {"farkas_min_ATy": worst, "farkas_by": gap})
    d_eq, d_ub = std.split_duals(y_full)
    return LPSolution(INFEASIBLE, None, None, d_eq, d_ub, pivots=sol.pivots,
                      residuals={"farkas_min_ATy": worst, "farkas_by": gap},
                      farkas=(y_full, std.A, std.b))


def _solve(lp: LinearProgram, max_pivots: int | None = None) -> LPSolution:
    std = _Standard(lp)
    A, b, c = std.A, std.b, std.c
    m, N = A.shape
    if max_pivots is None:
        max_pivots = 50 * (m + N) + 1000

    # phase 1: a +1 slack on a non-flipped row is a ready-made basic column
    n_slack_start = std.n0
    basis, art_rows = [], []
    for r in range(m):
        if r >= std.m_eq and std.sign[r] > 0:
            basis.append(n_slack_start + r - std.m_eq)
        else:
            basis.append(None)
            art_rows.append(r)
    n_art = len(art_rows)
    A1 = np.hstack([A, np.zeros((m, n_art))])
    for k, r in enumerate(art_rows):
        A1[r, N + k] = 1.0
        basis[r] = N + k
    c1 = np.concatenate([np.zeros(N), -np.ones(n_art)])
    tab = _Tableau(A1, b, c1, basis)
    status, _ = tab.run(N + n_art, max_pivots)
    phase1 = float(c1[tab.basis] @ tab.beta) if tab.basis else 0.0
    feas_tol = 1e-9 * (1.0 + np.abs(b).max(initial=0.0))
    if phase1 < -feas_tol:
        return _infeasible(std, tab, A1, b, c1)

    # drive artificials out of the basis; rows with no real pivot are redundant
    tab.reinvert()
    r = 0
    while r < len(tab.rows):
        if tab.basis[r] >= N:
            mags = np.abs(tab.tab[r, :N])
            j = int(np.argmax(mags)) if N else 0
            if N and mags[j] > 1e-7:
                tab.pivot(r, j)
                r += 1
            else:
                # the redundant constraint is the artificial's own row
                tab.drop_row(r, art_rows[tab.basis[r] - N])
        else:
            r += 1

    pivots1 = tab.pivots
    tab2 = _Tableau(A, b, c, tab.basis, rows=tab.rows)
    status, j = tab2.run(N, max_pivots)
    total_pivots = pivots1 + tab2.pivots
    if status == UNBOUNDED:
        return _unbounded(lp, std, tab2, j, total_pivots)
    return _optimal(lp, std, tab2, total_pivots)


def _checked_farkas(y, A, b):
    """Normalise ``y`` to unit max-norm and test A.T y >= 0, b.y < 0.

    Returns ``(y, min A.T y, b.y)``; ``y`` is None when the test fails. A
    passing certificate rules out every z >= 0 with A z = b and
    ``|z|_1 < FARKAS_GAP / FARKAS_SLACK``.
    """
    top = np.abs(y).max(initial=0.0)
    if top == 0.0:
        return None, 0.0, 0.0
    y = y / top
    worst = float((A.T @ y).min(initial=0.0))
    gap = float(b @ y)
    if worst < -FARKAS_SLACK or gap > -FARKAS_GAP:
        return None, worst, gap
    return y, worst, gap


def _infeasible(std, tab, A1, b, c1):
    tab.reinvert()
    y_rows = np.asarray(tab.y)
    y = np.zeros(A1.shape[0])
    y[tab.rows] = y_rows
    A = std.A
    y, worst, gap = _checked_farkas(y, A, b)
    if y is None:
        diag = _diagnostics(tab)
        diag.update(farkas_min_ATy=worst, farkas_by=gap)
        raise NumericalBreakdown("Farkas certificate failed verification", diag)
    y_eq, y_ub = std.split_duals(y)
    return LPSolution(
        status=INFEASIBLE, value=None, x=None, dual_eq=y_eq, dual_ub=y_ub,
        pivots=tab.pivots, residuals={"farkas_min_ATy": worst, "farkas_by": gap},
        farkas=(y, A, b),
    )


def _unbounded(lp, std, tab, j, pivots):
    N = std.A.shape[1]
    d = np.zeros(N)
    d[j] = 1.0
    d[tab.basis] = -tab.tab[:, j]
    resid = float(np.abs(std.A @ d).max(initial=0.0))
    gain = float(std.c @ d)
    if resid > 1e-7 or d.min() < -1e-9 or gain <= 0:
        raise NumericalBreakdown("unbounded ray failed verification", _diagnostics(tab))
    ray = std.T @ d[: std.n0]
    return LPSolution(
        status=UNBOUNDED, value=np.inf, x=None, ray=ray, pivots=pivots,
        residuals={"ray_residual": resid, "ray_gain": gain},
    )


def _optimal(lp, std, tab, pivots):
    tab.reinvert()
    A, b, c = std.A, std.b, std.c
    N = A.shape[1]
    z = np.zeros(N)
    z[tab.basis] = tab.beta
    z = np.where(z < 0, np.where(z > -1e-9, 0.0, z), z)
    y = np.zeros(A.shape[0])
    y[tab.rows] = tab.y
    d = c - A.T @ y
    scale = 1.0 + np.abs(b).max(initial=0.0)
    res = {
        "primal": float(np.abs(A @ z - b).max(initial=0.0)) / scale,
        "nonneg": float(max(0.0, -z.min(initial=0.0))),
        "dual": float(max(0.0, d.max(initial=0.0))),
        "slackness": float(np.abs(z * d).max(initial=0.0)),
    }
    x = std.to_x(z)
    orig = lp.residuals(x)
    res.update({f"orig_{k}": v for k, v in orig.items()})
    ok = (
        res["primal"] <= PRIMAL_TOL and res["nonneg"] <= PRIMAL_TOL
        and res["dual"] <= PRIMAL_TOL and res["slackness"] <= SLACKNESS_TOL
        and max(orig.values()) <= PRIMAL_TOL
    )
    if not ok:
        diag = _diagnostics(tab)
        diag.update(res)
        raise NumericalBreakdown("optimal solution failed verification", diag)
    y_eq, y_ub = std.split_duals(y)
    value = float(lp.objective @ x)
    return LPSolution(
        status=OPTIMAL, value=value, x=x, dual_eq=y_eq, dual_ub=y_ub,
        pivots=pivots, residuals=res,
    )

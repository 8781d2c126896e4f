"""Outcome-side analogues: Bayesian inversion of responses and realisability
of measurement tables by deterministic non-contextual models.

A table is non-contextually realisable when it is a convex mixture of global
deterministic outcome assignments. Failure comes with a linear inequality
that every such mixture satisfies and the table violates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterDependence, SearchSpaceTooLarge, ShapeMismatch, UndefinedPosterior
from .lp import INFEASIBLE, LinearProgram, lp_solve
from .ontology import OnticSpace, OntologicalModel, OverlapReport, ResponseFunctions, overlap_of

MAX_MEASUREMENTS = 4
MAX_OUTCOMES = 4


class _Undefined:
    """Posterior of an outcome that never occurs under the prior."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


@dataclass(frozen=True, eq=False)
class MeasurementScenario:
    """Contexts of jointly measurable measurements with their outcome tables.

    ``tables[i]`` has one axis per measurement of ``contexts[i]`` (in that
    order) and holds p(joint outcome | context).
    """

    measurements: tuple
    outcomes: dict
    contexts: tuple
    tables: tuple

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        object.__setattr__(self, "contexts", tuple(tuple(c) for c in self.contexts))
        object.__setattr__(self, "outcomes", {m: tuple(o) for m, o in self.outcomes.items()})
        tables = tuple(np.asarray(t, dtype=float) for t in self.tables)
        object.__setattr__(self, "tables", tables)
        if len(tables) != len(self.contexts):
            raise ShapeMismatch("one table per context required")
        for ctx, t in zip(self.contexts, tables):
            if any(m not in self.outcomes for m in ctx):
                raise DomainError(f"context {ctx} uses an unknown measurement")
            shape = tuple(len(self.outcomes[m]) for m in ctx)
            if t.shape != shape:
                raise ShapeMismatch(f"table for {ctx} has shape {t.shape}, expected {shape}")
            if abs(t.sum() - 1.0) > 1e-9 or t.min() < -1e-12:
                raise DomainError(f"table for {ctx} is not a probability distribution")

    def disturbance(self) -> float:
        """Largest disagreement between marginals of a measurement across contexts."""
        worst = 0.0
        for m in self.measurements:
            margs = []
            for ctx, t in zip(self.contexts, self.tables):
                if m in ctx:
                    i = ctx.index(m)
                    margs.append(t.sum(axis=tuple(j for j in range(t.ndim) if j != i)))
            for a, b in itertools.combinations(margs, 2):
                worst = max(worst, float(np.abs(a - b).max()))
        return worst


@dataclass(frozen=True)
class Realizable:
    """Mixture of global assignments (measurement -> outcome label) reproducing the table."""

    mixture: tuple  # of (weight, assignment dict)
    residual: float


@dataclass(frozen=True)
class NotRealizable:
    """Inequality sum coefficients[ctx][s] * p(s | ctx) >= local_bound, violated by the table.

    ``local_bound`` is the minimum of the left side over deterministic
    assignments; ``observed`` is its value on the table.
    """

    coefficients: tuple
    local_bound: float
    observed: float
    details: dict = field(default_factory=dict)

    def evaluate(self, tables) -> float:
        return float(sum((np.asarray(c) * np.asarray(t)).sum() for c, t in zip(self.coefficients, tables)))


def _assignments(scn: MeasurementScenario):
    sizes = [len(scn.outcomes[m]) for m in scn.measurements]
    return list(itertools.product(*[range(s) for s in sizes]))


def assignment_matrix(scn: MeasurementScenario) -> np.ndarray:
    """Rows: (context, joint outcome) cells; columns: global deterministic assignments."""
    if len(scn.measurements) > MAX_MEASUREMENTS or any(len(o) > MAX_OUTCOMES for o in scn.outcomes.values()):
        raise SearchSpaceTooLarge(f"scenarios are capped at {MAX_MEASUREMENTS} measurements "
                                  f"with {MAX_OUTCOMES} outcomes each")
    assigns = _assignments(scn)
    rows = []
    for ctx, t in zip(scn.contexts, scn.tables):
        pos = [scn.measurements.index(m) for m in ctx]
        for cell in np.ndindex(*t.shape):
            rows.append([1.0 if tuple(g[p] for p in pos) == cell else 0.0 for g in assigns])
    return np.array(rows)


def noncontextual_realizable(scn: MeasurementScenario):
    """Decide realisability by an LP over mixtures of deterministic assignments."""
    A = assignment_matrix(scn)
    b = np.concatenate([t.ravel() for t in scn.tables])
    assigns = _assignments(scn)
    sol = lp_solve(LinearProgram.build(np.zeros(A.shape[1]), A_eq=A, b_eq=b))
    if sol.status == INFEASIBLE:
        y = sol.dual_eq / np.abs(sol.dual_eq).max()
        lhs = A.T @ y
        coeffs, start = [], 0
        for t in scn.tables:
            coeffs.append(y[start:start + t.size].reshape(t.shape))
            start += t.size
        return NotRealizable(tuple(coeffs), float(lhs.min()), float(b @ y),
                             {"farkas_min_ATy": sol.residuals.get("farkas_min_ATy")})
    w = np.clip(sol.x, 0.0, None)
    mix = tuple(
        (float(w[i]), {m: scn.outcomes[m][g[k]] for k, m in enumerate(scn.measurements)})
        for i, g in enumerate(assigns) if w[i] > 1e-12
    )
    return Realizable(mix, float(np.abs(A @ w - b).max()))


def bipartite_scenario(p, labels=("a0", "a1", "b0", "b1"), outcomes=(0, 1)) -> MeasurementScenario:
    """Two parties with two measurements each; ``p[a, b, x, y] = p(a, b | x, y)``."""
    p = np.asarray(p, dtype=float)
    a0, a1, b0, b1 = labels
    contexts, tables = [], []
    for x, ma in enumerate((a0, a1)):
        for y, mb in enumerate((b0, b1)):
            contexts.append((ma, mb))
            tables.append(p[:, :, x, y])
    outs = {m: tuple(outcomes) for m in labels}
    return MeasurementScenario(labels, outs, contexts, tables)


def pr_box() -> MeasurementScenario:
    p = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        if (a ^ b) == (x & y):
            p[a, b, x, y] = 0.5
    return bipartite_scenario(p)


def quantum_chsh() -> MeasurementScenario:
    """Maximally entangled pair at the angles maximising the CHSH violation."""
    angles_a, angles_b = (0.0, math.pi / 2), (math.pi / 4, -math.pi / 4)
    p = np.zeros((2, 2, 2, 2))
    for x, y in itertools.product(range(2), repeat=2):
        corr = math.cos(angles_a[x] - angles_b[y])
        for a, b in itertools.product(range(2), repeat=2):
            sign = 1 if a == b else -1
            p[a, b, x, y] = (1 + sign * corr) / 4
    return bipartite_scenario(p)


def product_scenario(pa, pb) -> MeasurementScenario:
    """Independent parties: ``pa[x]`` and ``pb[y]`` are outcome distributions."""
    pa, pb = np.asarray(pa, dtype=float), np.asarray(pb, dtype=float)
    p = np.einsum("xa,yb->abxy", pa, pb)
    return bipartite_scenario(p)


# --- Bayesian inversion --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InversionResult:
    posterior: dict  # outcome -> ndarray or UNDEFINED
    prior: np.ndarray
    outcome_probs: dict
    space: OnticSpace
    responses: ResponseFunctions

    def bayes_residual(self) -> float:
        """max |posterior(l|o) p(o) - xi_o(l) prior(l)| over defined posteriors."""
        worst = 0.0
        for k, o in enumerate(self.responses.outcomes):
            post = self.posterior[o]
            if post is UNDEFINED:
                continue
            lhs = post * self.outcome_probs[o]
            worst = max(worst, float(np.abs(lhs - self.responses.xi[k] * self.prior).max()))
        return worst


def _space_of(model) -> OnticSpace:
    if isinstance(model, OntologicalModel):
        if model.preps.n != 1:
            raise DomainError("inversion needs a single-site model")
        return model.space
    if isinstance(model, OnticSpace):
        return model
    raise DomainError("expected an OntologicalModel or OnticSpace")


def parameter_dependence(measurement: dict, tol=1e-9):
    """First pair of contexts whose response functions disagree, else None."""
    items = list(measurement.items())
    for (c1, r1), (c2, r2) in itertools.combinations(items, 2):
        if r1.outcomes != r2.outcomes or r1.xi.shape != r2.xi.shape or \
                np.abs(np.asarray(r1.xi) - np.asarray(r2.xi)).max() > tol:
            return c1, c2
    return None


def bayes_invert(model, prior, measurement, tol=1e-9) -> InversionResult:
    """posterior(l | o) = xi_o(l) prior(l) / p(o).

    ``measurement`` is either a ResponseFunctions or a mapping from context
    label to the ResponseFunctions observed in that context; in the latter
    case all contexts must agree. Outcomes with p(o) = 0 get
    :data:`UNDEFINED`.
    """
    space = _space_of(model)
    if isinstance(measurement, dict):
        clash = parameter_dependence(measurement, tol)
        if clash is not None:
            raise ParameterDependence(f"responses differ between contexts {clash}", clash)
        measurement = next(iter(measurement.values()))
    if measurement.sites != 1 or measurement.xi.shape[1] != space.size:
        raise ShapeMismatch("single-site responses on the model's space required")
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (space.size,) or abs(prior.sum() - 1.0) > tol or prior.min() < -tol:
        raise DomainError("prior must be a distribution on the ontic space")
    xi = np.asarray(measurement.xi)
    probs, post = {}, {}
    for k, o in enumerate(measurement.outcomes):
        joint = xi[k] * prior
        p = float(joint.sum())
        probs[o] = p
        post[o] = UNDEFINED if p <= 1e-15 else joint / p
    return InversionResult(post, prior, probs, space, measurement)


def outcome_overlap(inv: InversionResult, o1, o2) -> OverlapReport:
    for o in (o1, o2):
        if o not in inv.posterior:
            raise DomainError(f"unknown outcome {o!r}")
        if inv.posterior[o] is UNDEFINED:
            raise UndefinedPosterior(f"outcome {o!r} has probability zero")
    return overlap_of(inv.posterior[o1], inv.posterior[o2], inv.space, (str(o1), str(o2)))


__all__ = [
    "UNDEFINED", "MeasurementScenario", "Realizable", "NotRealizable", "InversionResult",
    "assignment_matrix", "noncontextual_realizable", "bipartite_scenario", "pr_box", "quantum_chsh",
    "product_scenario", "bayes_invert", "outcome_overlap", "parameter_dependence",
]

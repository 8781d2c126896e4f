"""Certificate-producing checks that overlap and conclusive exclusion clash.

For a product-form model whose sites overlap, every ontic tuple in the joint
overlap region is reached by all joint preparations. The responses there are
either unnormalised (a :data:`NORMALIZATION_GAP`) or some outcome keeps a
positive weight on that region, and that outcome's excluded preparation then
sees it with positive probability (an :data:`EXCLUSION_VIOLATION`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidModel, NotProductForm, PreconditionFailed
from .independence import TOL, CCWitness, check_preparation_independence, verify_cc_witness
from .ontology import (
    SUPPORT_TOL,
    CondDist,
    OntologicalModel,
    ResponseFunctions,
    exclusion_label,
    marginal,
    operational_table,
    product_dist,
    single_site,
    toy_marginals,
    toy_responses,
)
from .quantum import is_conclusive_exclusion

OVERLAP_ZERO = "OverlapZero"
NORMALIZATION_GAP = "NormalizationGap"
EXCLUSION_VIOLATION = "ExclusionViolation"


@dataclass(frozen=True)
class PBRVerdict:
    kind: str
    location: tuple
    magnitude: float
    details: dict = field(default_factory=dict)


def _site_overlaps(dist: CondDist, tol):
    """Per-site (omega_i, min-profile over preparations)."""
    out = []
    for i in range(dist.n):
        if dist.prep_shape[i] != 2:
            raise DomainError(f"site {i} needs exactly two preparations")
        m = marginal(dist, i, tol).table
        low = m.min(axis=0)
        out.append((float(low.sum()), low))
    return out


def pbr_contradiction(model: OntologicalModel, tol=TOL) -> PBRVerdict:
    """Locate why a product-form model cannot reproduce exclusion statistics.

    Returns OverlapZero when some site has no overlap (no contradiction
    available), otherwise a NormalizationGap or ExclusionViolation
    certificate.
    """
    dist = model.preps
    if model.measured_sites != tuple(range(dist.n)):
        raise DomainError("every site must be measured")
    verdict = check_preparation_independence(dist, tol)
    if not verdict.holds:
        raise NotProductForm(
            f"preparations do not factorize (violation {verdict.max_violation:.3g} "
            f"at {verdict.witness_context})"
        )
    sites = _site_overlaps(dist, tol)
    omegas = [w for w, _ in sites]
    mass = float(np.prod(omegas))
    details = {"site_overlaps": omegas, "overlap_mass": mass}
    if mass <= tol:
        zero = tuple(i for i, w in enumerate(omegas) if w <= tol)
        return PBRVerdict(OVERLAP_ZERO, zero or tuple(range(dist.n)), mass, details)

    inside = [np.flatnonzero(low > SUPPORT_TOL) for _, low in sites]
    totals = model.responses.totals()
    gap, gap_at = 0.0, None
    for lam in itertools.product(*inside):
        g = abs(1.0 - totals[lam])
        if g > gap:
            gap, gap_at = g, lam
    if gap > tol:
        return PBRVerdict(NORMALIZATION_GAP, dist.ontic_tuple(gap_at), float(gap), details)

    # g(lambda) = prod_i min_p mu_i(lambda_i | p) lower-bounds every context
    floor = np.ones(())
    for _, low in sites:
        floor = np.multiply.outer(floor, low)
    weights = np.tensordot(model.responses.xi, floor, axes=dist.n)
    o = int(np.argmax(weights))
    label = model.responses.outcomes[o]
    targets = {exclusion_label(p): p for p in dist.contexts()}
    if label not in targets:
        raise DomainError(f"outcome {label!r} does not exclude any joint preparation")
    preps = targets[label]
    table = operational_table(model, check=False)
    entry = table.entry(label, preps)
    details.update(outcome=label, lower_bound=float(weights[o]),
                   pigeonhole_bound=mass / len(model.responses.outcomes))
    return PBRVerdict(EXCLUSION_VIOLATION, preps, entry, details)


def verify_pbr_verdict(model: OntologicalModel, verdict: PBRVerdict, tol=TOL) -> bool:
    """Re-derive the verdict's claim directly from the model."""
    dist = model.preps
    if verdict.kind == OVERLAP_ZERO:
        return float(np.prod([w for w, _ in _site_overlaps(dist, tol)])) <= tol
    if verdict.kind == NORMALIZATION_GAP:
        idx = tuple(dist.space.index(x) for x in verdict.location)
        reached = all(marginal(dist, i, tol).table[:, idx[i]].min() > SUPPORT_TOL
                      for i in range(dist.n))
        return reached and abs(1.0 - model.responses.totals()[idx]) >= verdict.magnitude - 1e-12
    if verdict.kind == EXCLUSION_VIOLATION:
        table = operational_table(model, check=False)
        entry = table.entry(exclusion_label(verdict.location), verdict.location)
        return verdict.magnitude > tol and entry >= verdict.magnitude - 1e-12
    raise DomainError(f"unknown verdict kind {verdict.kind!r}")


def toy_product_model(omega1=0.5, omega2=0.5, completed=False) -> OntologicalModel:
    """Two independent toy sites measured with the toy responses.

    ``completed`` spreads the otherwise empty (l3, l3) cell uniformly over
    the four outcomes so that every response total equals one.
    """
    marg = toy_marginals(omega1, omega2)
    dist = product_dist(marg, marg)
    resp = toy_responses()
    if completed:
        xi = np.array(resp.xi)
        i = dist.space.index("l3")
        xi[:, i, i] = 1.0 / len(resp.outcomes)
        resp = ResponseFunctions(resp.outcomes, xi)
    return OntologicalModel(dist.space, dist, resp)


@dataclass(frozen=True)
class Proposition1Report:
    per_c: list
    integral_supports: list
    exchangeable: bool
    caveat: bool
    table_is_exclusion: bool

    @property
    def products_vanish(self) -> bool:
        return all(row["product"] <= TOL for row in self.per_c)


def proposition1_check(dist: CondDist, w: CCWitness, responses: ResponseFunctions,
                       strict=True, tol=TOL) -> Proposition1Report:
    """Overlap analysis of a common-past decomposition under exclusion statistics.

    For each common-past value the conditional overlaps of every site are
    multiplied; a positive product is handed to :func:`pbr_contradiction`
    on the conditional product model. Supports on Lambda x Lambda_c are also
    compared per site. With ``strict`` the operational table must be a
    conclusive exclusion table.
    """
    check = verify_cc_witness(dist, w, tol)
    if not check.holds:
        raise PreconditionFailed("cc_witness", f"witness fails (violation {check.max_violation:.3g})")
    model = OntologicalModel(dist.space, dist, responses)
    try:
        table = operational_table(model)
    except InvalidModel as exc:
        raise PreconditionFailed("model", str(exc)) from None
    exclusive, bad = is_conclusive_exclusion(table, tol)
    if strict and not exclusive:
        raise PreconditionFailed("conclusive_exclusion", f"non-zero exclusion cells {bad}")

    overlaps = check.details["conditional_overlaps"]
    per_c = []
    for c, name in enumerate(w.common_past):
        site_w = [overlaps[(i, name)] for i in range(dist.n)]
        row = {"c": name, "weight": float(w.weight[c]), "site_overlaps": site_w,
               "product": float(np.prod(site_w)), "verdict": None}
        if row["product"] > tol:
            factors = [single_site(dist.space, dict(zip(dist.prep_labels[i], w.locals[i][:, c, :])))
                       for i in range(dist.n)]
            cond = product_dist(*factors)
            row["verdict"] = pbr_contradiction(OntologicalModel(dist.space, cond, responses), tol)
        per_c.append(row)

    supports = []
    for i, loc in enumerate(w.locals):
        sets = []
        for p in range(loc.shape[0]):
            mass = w.weight[None, :] * loc[p].T  # (lambda, c)
            sets.append({(dist.space.labels[l], w.common_past[c])
                         for l, c in zip(*np.nonzero(mass > SUPPORT_TOL))})
        common = set.intersection(*sets) if sets else set()
        supports.append({"site": i, "supports": [sorted(s) for s in sets],
                         "intersection": sorted(common)})
    exchangeable = all(np.allclose(w.locals[0], loc, atol=tol) for loc in w.locals[1:])
    caveat = any(s["intersection"] for s in supports) and not exchangeable
    return Proposition1Report(per_c, supports, exchangeable, caveat, exclusive)


__all__ = [
    "OVERLAP_ZERO", "NORMALIZATION_GAP", "EXCLUSION_VIOLATION", "PBRVerdict",
    "Proposition1Report", "pbr_contradiction", "verify_pbr_verdict", "toy_product_model",
    "proposition1_check",
]

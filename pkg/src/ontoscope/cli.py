"""Command-line front end.

Exit codes: 0 success / property holds, 2 analytic finding (mismatch,
violation, certificate), 3 solver failure, 64 usage or input error.
Every run writes ``run_manifest.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io as oio
from .contextuality import (
    NotRealizable,
    bayes_invert,
    noncontextual_realizable,
    pr_box,
    product_scenario,
    quantum_chsh,
)
from .definetti import BoundInputs, best_iid_mixture, bound_rows, ct_bound, theorem3_bound
from .errors import Infeasible, NumericalBreakdown, OntoscopeError, PreconditionFailed
from .exclusion import OVERLAP_ZERO, pbr_contradiction, proposition1_check, toy_product_model, verify_pbr_verdict
from .independence import (
    check_preparation_independence,
    check_subsystem_condition,
    find_cc_witness,
    verify_cc_witness,
)
from .ontology import (
    PRNG_METADATA,
    TOY_SPACE,
    OnticSpace,
    ResponseFunctions,
    operational_table,
    overlap,
    overlap_sweep,
    sample,
    toy_extension,
    toy_model,
    toy_responses,
)
from .optimize import max_overlap_bipartite, max_overlap_symmetric, symmetric_sweep_point
from .quantum import born_table, canonical_pair, pbr_measurement

EXIT_OK, EXIT_FINDING, EXIT_SOLVER, EXIT_USAGE = 0, 2, 3, 64
MODEL_SHORTCUTS = ("toy", "toy-product", "toy-product-completed", "toy-ext4")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    """Convert numpy values and tuples/dict keys into plain JSON types."""
    if isinstance(obj, dict):
        return {(k if isinstance(k, str) else ",".join(map(str, k)) if isinstance(k, tuple) else str(k)):
                _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Run:
    """Collects outputs of one command and writes them plus the manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out_dir = Path(args.out_dir)
        self.inputs = {}
        self.outputs = {}
        self.extra = {}
        self.seed = None
        self.start = time.perf_counter()

    def note_input(self, path):
        if path and os.path.exists(path):
            self.inputs[str(path)] = oio.file_digest(path)

    def write(self, name, text):
        self.outputs[name] = oio.atomic_write(self.out_dir / name, text)

    def write_json(self, name, doc):
        self.write(name, oio.dumps(_jsonable(doc)))

    def finish(self, code):
        manifest = {
            "command": self.args.command,
            "argv": self.argv,
            "inputs": self.inputs,
            "seed": self.seed,
            "tool_version": __version__,
            "wall_ms": int(round(1000 * (time.perf_counter() - self.start))),
            "outputs": self.outputs,
            "exit_code": code,
        }
        manifest.update(self.extra)
        oio.atomic_write(self.out_dir / "run_manifest.json", oio.dumps(_jsonable(manifest)))
        return code


# --- input helpers ------------------------------------------------------------

def _load_model(run, name):
    """Return (dist, model_or_None) for a shortcut name or a JSON path."""
    if name == "toy":
        m = toy_model()
        return m.preps, m
    if name == "toy-product":
        m = toy_product_model()
        return m.preps, m
    if name == "toy-product-completed":
        m = toy_product_model(completed=True)
        return m.preps, m
    if name == "toy-ext4":
        return toy_extension(4), None
    if not os.path.exists(name):
        raise UsageError(f"model {name!r} is neither a file nor one of {', '.join(MODEL_SHORTCUTS)}")
    run.note_input(name)
    return oio.model_from_json(oio.read_json(name))


def _load_table(run, name):
    if name == "table2":
        return born_table(canonical_pair(math.pi / 4), pbr_measurement(canonical_pair(math.pi / 4)))
    if not os.path.exists(name):
        raise UsageError(f"target {name!r} is neither a file nor 'table2'")
    run.note_input(name)
    return oio.empirical_from_json(oio.read_json(name))


def _load_responses(run, name):
    if name == "toy":
        return toy_responses(), TOY_SPACE
    _, model = _load_model(run, name)
    if model is None:
        raise UsageError("responses file carries no responses")
    return model.responses, model.space


def _need(model, what):
    if model is None:
        raise UsageError(f"{what} needs a model with response functions")
    return model


def _threads():
    raw = os.environ.get("ONTOSCOPE_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise UsageError("ONTOSCOPE_THREADS must be an integer") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _verdict_doc(v):
    return {"check": v.check, "holds": v.holds, "max_violation": v.max_violation,
            "witness_context": v.witness_context, "details": v.details}


# --- commands -----------------------------------------------------------------

def cmd_table2(run, a):
    pair = canonical_pair(math.pi / 4)
    quantum = born_table(pair, pbr_measurement(pair))
    model = toy_model(a.omega1, a.omega2)
    toy = operational_table(model)
    run.write_json("table2.json", oio.empirical_to_json(quantum))
    run.write_json("table2_toy.json", oio.empirical_to_json(toy))
    diff = quantum.max_difference(toy)
    summary = {"max_difference": diff, "match": diff <= 1e-12, "omega1": a.omega1, "omega2": a.omega2}
    if a.shots:
        run.seed = 0 if a.seed is None else a.seed
        freqs = {}
        for shard, ctx in enumerate(toy.contexts()):
            res = sample(model, ctx, a.shots, run.seed, shard)
            freqs[",".join(ctx)] = res.frequencies()
        run.write_json("table2_samples.json", {"shots": a.shots, "frequencies": freqs,
                                               "prng": dict(PRNG_METADATA, seed=run.seed)})
    if a.format == "csv":
        rows = []
        for ctx in quantum.contexts():
            for o in quantum.outcomes:
                row = [",".join(ctx), o, quantum.entry(o, ctx), toy.entry(o, ctx)]
                if a.shots:
                    row.append(freqs[",".join(ctx)][o])
                rows.append(row)
        header = ["preparations", "outcome", "quantum", "toy"] + (["sampled"] if a.shots else [])
        run.write("table2.csv", oio.csv_text(header, rows))
    run.write_json("table2_summary.json", summary)
    print(json.dumps(_jsonable(summary)))
    return EXIT_OK if summary["match"] else EXIT_FINDING


def cmd_independence(run, a):
    dist, _ = _load_model(run, a.model)
    if a.mode == "prep":
        v = check_preparation_independence(dist, a.tolerance)
        doc = _verdict_doc(v)
    elif a.mode == "subsystem":
        v = check_subsystem_condition(dist, a.tolerance)
        doc = _verdict_doc(v)
    else:
        if a.witness == "auto":
            a.witness = "toy" if a.model == "toy" else "search"
        if a.witness != "search":
            if a.witness == "toy":
                w = oio.witness_from_json(oio.bundled("toy_witness.json"), dist)
            else:
                run.note_input(a.witness)
                w = oio.witness_from_json(oio.read_json(a.witness), dist)
        else:
            w = find_cc_witness(dist, a.max_c, tol=a.tolerance)
            if w is None:
                doc = {"check": "classical-correlation", "holds": False, "found": False,
                       "searched": f"deterministic locals, up to {a.max_c} common-past values"}
                run.write_json("independence.json", doc)
                print(json.dumps(_jsonable(doc)))
                return EXIT_FINDING
            run.write_json("witness.json", oio.witness_to_json(w, dist))
        v = verify_cc_witness(dist, w, a.tolerance)
        doc = _verdict_doc(v)
    run.write_json("independence.json", doc)
    print(json.dumps(_jsonable({k: doc[k] for k in ("check", "holds", "max_violation", "witness_context")})))
    return EXIT_OK if v.holds else EXIT_FINDING


def cmd_overlap(run, a):
    if a.sweep:
        grid = [round(x, 10) for x in np.linspace(0.05, 0.95, a.sweep)]
        rows = overlap_sweep(grid, grid)
        header = ["omega1", "omega2", "omega", "delta_size"]
        if a.format == "csv":
            run.write("overlap_sweep.csv", oio.csv_text(header, rows))
        else:
            run.write_json("overlap_sweep.json", [dict(zip(header, r)) for r in rows])
        print(json.dumps({"points": len(rows)}))
        return EXIT_OK
    dist, _ = _load_model(run, a.model)
    rep = overlap(dist, a.p, a.q, site=a.site, tol=a.tolerance)
    doc = {"omega": rep.omega, "delta": rep.delta, "per_prep_mass": rep.per_prep_mass,
           "distance": rep.distance, "site": a.site, "preparations": [a.p, a.q]}
    run.write_json("overlap.json", doc)
    print(json.dumps(_jsonable(doc)))
    return EXIT_OK


def cmd_pbr_check(run, a):
    _, model = _load_model(run, a.model)
    model = _need(model, "pbr-check")
    v = pbr_contradiction(model, a.tolerance)
    ok = verify_pbr_verdict(model, v, a.tolerance)
    doc = {"kind": v.kind, "location": v.location, "magnitude": v.magnitude,
           "details": v.details, "verified": ok}
    run.write_json("pbr_verdict.json", doc)
    print(json.dumps(_jsonable({k: doc[k] for k in ("kind", "location", "magnitude", "verified")})))
    if not ok:
        return EXIT_SOLVER
    return EXIT_OK if v.kind == OVERLAP_ZERO else EXIT_FINDING


def cmd_prop1_check(run, a):
    dist, model = _load_model(run, a.model)
    model = _need(model, "prop1-check")
    if a.witness == "toy":
        w = oio.witness_from_json(oio.bundled("toy_witness.json"), dist)
    else:
        run.note_input(a.witness)
        w = oio.witness_from_json(oio.read_json(a.witness), dist)
    rep = proposition1_check(dist, w, model.responses, strict=not a.no_strict, tol=a.tolerance)
    per_c = []
    for row in rep.per_c:
        row = dict(row)
        v = row.pop("verdict")
        row["verdict"] = None if v is None else {"kind": v.kind, "location": v.location,
                                                  "magnitude": v.magnitude}
        per_c.append(row)
    doc = {"per_c": per_c, "products_vanish": rep.products_vanish,
           "integral_supports": rep.integral_supports, "exchangeable": rep.exchangeable,
           "exchangeability_caveat": rep.caveat, "table_is_exclusion": rep.table_is_exclusion}
    run.write_json("prop1.json", doc)
    print(json.dumps(_jsonable({k: doc[k] for k in ("products_vanish", "exchangeability_caveat")})))
    return EXIT_OK if rep.products_vanish else EXIT_FINDING


def cmd_definetti_bound(run, a):
    ns = a.n_list or [a.n]
    rows = bound_rows(ns, a.m, a.lambda_count, a.p_count)
    header = ["n", "m", "lambda_count", "eq11_bound", "eq14_bound", "achieved_distance"]
    if a.format == "csv":
        run.write("definetti_bounds.csv", oio.csv_text(header, rows))
    else:
        run.write_json("definetti_bounds.json", [dict(zip(header, r)) for r in rows])
    print(json.dumps(_jsonable([dict(zip(header, r)) for r in rows])))
    return EXIT_OK


def cmd_best_mixture(run, a):
    dist, _ = _load_model(run, a.model)
    w = best_iid_mixture(dist, a.m, a.grid)
    bound = ct_bound(BoundInputs(dist.n, a.m, dist.prep_shape[0], dist.space.size))
    doc = {
        "achieved_distance": w.achieved_distance, "ct_bound": bound, "grid_resolution": a.grid,
        "m": a.m, "n": dist.n,
        "components": [{"weight": wt, "conditional": oio.dist_to_json(c)["preps"]} for wt, c in w.components],
    }
    run.write_json("best_mixture.json", doc)
    print(json.dumps(_jsonable({"achieved_distance": w.achieved_distance, "ct_bound": bound,
                                "components": len(w.components)})))
    return EXIT_OK if w.achieved_distance <= bound + 1e-7 else EXIT_FINDING


def cmd_max_overlap(run, a):
    target = _load_table(run, a.target)
    responses, space = _load_responses(run, a.responses)
    try:
        if a.n is None:
            opt = max_overlap_bipartite(target, responses, space)
            model_doc = oio.dist_to_json(opt.model)
        else:
            opt = max_overlap_symmetric(a.n, target.n, target, responses, space)
            model_doc = {"n": a.n, "orbit_values": [float(v) for v in opt.model.values]}
    except Infeasible as exc:
        sol = exc.solution
        doc = {"status": "Infeasible", "message": str(exc),
               "farkas_eq": sol.dual_eq, "farkas_ub": sol.dual_ub, "residuals": sol.residuals}
        run.write_json("max_overlap.json", doc)
        print(json.dumps({"status": "Infeasible"}))
        return EXIT_FINDING
    doc = {"status": opt.solution.status, "omega_star": opt.omega_star, "model": model_doc,
           "pivots": opt.solution.pivots, "residuals": opt.solution.residuals}
    run.write_json("max_overlap.json", doc)
    print(json.dumps(_jsonable({"status": doc["status"], "omega_star": opt.omega_star})))
    return EXIT_OK


GNUPLOT = """set datafile separator ','
set key top right
set xlabel 'n'
set ylabel 'overlap'
set logscale y
plot '{csv}' using 1:5 skip 1 with linespoints title 'bound', \\
     '{csv}' using 1:4 skip 1 with points title 'LP optimum'
"""


def cmd_theorem3(run, a):
    target = _load_table(run, a.target)
    responses, space = _load_responses(run, a.responses)
    if space.size != a.lambda_count:
        raise UsageError(f"responses live on {space.size} ontic states, --lambda-count is {a.lambda_count}")
    if target.n != a.m:
        raise UsageError(f"target acts on {target.n} sites, --m is {a.m}")
    ns = sorted(set(a.n_list))

    def point(n):
        return symmetric_sweep_point(n, a.m, target, responses, space, theorem3_bound(n, a.m, a.lambda_count))

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = {n: r for n, r in zip(ns, pool.map(point, ns))}
    rows = [results[n] for n in ns]
    header = ["n", "m", "lambda_count", "omega_star", "eq14_bound", "lp_status"]
    table = [(r.n, r.m, r.lambda_count, r.omega_star, r.bound, r.lp_status) for r in rows]
    run.write("theorem3.csv", oio.csv_text(header, table))
    run.write("theorem3.gp", GNUPLOT.format(csv="theorem3.csv"))
    run.write_json("theorem3.json", [dict(zip(header, t)) for t in table])
    run.extra["timings_ms"] = {str(r.n): r.wall_ms for r in rows}
    violated = [r.n for r in rows if r.omega_star > r.bound + 1e-6]
    for t in table:
        print(",".join("" if v is None else str(v) for v in t))
    if violated:
        print(f"BOUND VIOLATED at n = {violated}", file=sys.stderr)
        return EXIT_FINDING
    return EXIT_OK


def _scenario(run, name):
    if name == "pr-box":
        return pr_box()
    if name == "chsh":
        return quantum_chsh()
    if name == "product":
        return product_scenario([[0.5, 0.5], [0.2, 0.8]], [[1.0, 0.0], [0.3, 0.7]])
    if not os.path.exists(name):
        raise UsageError(f"scenario {name!r} is neither a file nor one of pr-box, chsh, product")
    run.note_input(name)
    return oio.scenario_from_json(oio.read_json(name))


def cmd_contextuality(run, a):
    scn = _scenario(run, a.scenario)
    res = noncontextual_realizable(scn)
    if isinstance(res, NotRealizable):
        doc = {"realizable": False, "coefficients": res.coefficients, "local_bound": res.local_bound,
               "observed": res.observed, "contexts": scn.contexts}
    else:
        doc = {"realizable": True, "residual": res.residual,
               "mixture": [{"weight": w, "assignment": g} for w, g in res.mixture]}
    if a.prior is not None:
        prior = np.array(a.prior, dtype=float)
        space = OnticSpace.of_size(prior.size)
        xi = np.array(a.responses, dtype=float).reshape(-1, prior.size)
        resp = ResponseFunctions(tuple(f"o{i}" for i in range(xi.shape[0])), xi)
        inv = bayes_invert(space, prior, resp, a.tolerance)
        doc["inversion"] = {"posterior": {o: (None if not isinstance(p, np.ndarray) else p)
                                          for o, p in inv.posterior.items()},
                            "outcome_probs": inv.outcome_probs, "bayes_residual": inv.bayes_residual()}
    run.write_json("contextuality.json", doc)
    print(json.dumps(_jsonable({"realizable": doc["realizable"]})))
    return EXIT_OK if doc["realizable"] else EXIT_FINDING


def cmd_sample(run, a):
    _, model = _load_model(run, a.model)
    model = _need(model, "sample")
    run.seed = 0 if a.seed is None else a.seed
    res = sample(model, tuple(a.preps.split(",")), a.shots, run.seed, a.shard)
    doc = {"preparations": res.preps, "shots": res.shots, "counts": res.counts, "prng": res.prng}
    if a.format == "csv":
        run.write("sample.csv", oio.csv_text(["outcome", "count"], sorted(res.counts.items())))
    else:
        run.write_json("sample.json", doc)
    print(json.dumps(_jsonable(res.counts)))
    return EXIT_OK


COMMANDS = {
    "table2": cmd_table2,
    "independence": cmd_independence,
    "overlap": cmd_overlap,
    "pbr-check": cmd_pbr_check,
    "prop1-check": cmd_prop1_check,
    "definetti-bound": cmd_definetti_bound,
    "best-mixture": cmd_best_mixture,
    "max-overlap": cmd_max_overlap,
    "theorem3": cmd_theorem3,
    "contextuality": cmd_contextuality,
    "sample": cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tolerance", type=float, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)

    p = _Parser(prog="ontoscope", description="Finite ontological model toolkit.")
    p.add_argument("--version", action="version", version=f"ontoscope {__version__}")
    p.add_argument("--tolerance", type=float, default=1e-9, help="numerical tolerance for verdicts")
    p.add_argument("--seed", type=int, default=None, help="PRNG seed for sampling")
    p.add_argument("--out-dir", default="ontoscope-out", help="directory for output files")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("table2", parents=[common], help="reproduce the two-copy exclusion table")
    s.add_argument("--omega1", type=float, default=0.5)
    s.add_argument("--omega2", type=float, default=0.5)
    s.add_argument("--shots", type=int, default=0)

    s = sub.add_parser("independence", parents=[common], help="check an independence notion")
    s.add_argument("model", nargs="?", default="toy")
    s.add_argument("--mode", choices=("prep", "cc", "subsystem"), required=True)
    s.add_argument("--witness", default="auto",
                   help="witness JSON file, 'toy' (bundled), or 'search'; default: bundled for the toy model")
    s.add_argument("--max-c", type=int, default=2)

    s = sub.add_parser("overlap", parents=[common], help="epistemic overlap of two preparations")
    s.add_argument("model", nargs="?", default="toy")
    s.add_argument("--p", default="psi")
    s.add_argument("--q", default="phi")
    s.add_argument("--site", type=int, default=0)
    s.add_argument("--sweep", type=int, default=0, help="grid points per axis for a toy-model sweep")

    s = sub.add_parser("pbr-check", parents=[common], help="overlap vs. exclusion certificate")
    s.add_argument("model", nargs="?", default="toy-product")

    s = sub.add_parser("prop1-check", parents=[common], help="common-past overlap analysis")
    s.add_argument("model", nargs="?", default="toy")
    s.add_argument("--witness", default="toy")
    s.add_argument("--no-strict", action="store_true")

    s = sub.add_parser("definetti-bound", parents=[common], help="finite de Finetti bounds")
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--n-list", type=_int_list)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--p-count", type=int, default=2)
    s.add_argument("--lambda-count", type=int, default=3)

    s = sub.add_parser("best-mixture", parents=[common], help="closest i.i.d. mixture witness")
    s.add_argument("model", nargs="?", default="toy-ext4")
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--grid", type=int, default=16)

    s = sub.add_parser("max-overlap", parents=[common], help="maximal overlap LP")
    s.add_argument("--target", default="table2")
    s.add_argument("--responses", default="toy")
    s.add_argument("--n", type=int, help="symmetric n-site LP instead of the bipartite one")

    s = sub.add_parser("theorem3", parents=[common], help="symmetric overlap sweep against the bound")
    s.add_argument("--n-list", type=_int_list, default=[4, 8, 12, 16])
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--lambda-count", type=int, default=3)
    s.add_argument("--target", default="table2")
    s.add_argument("--responses", default="toy")

    s = sub.add_parser("contextuality", parents=[common], help="non-contextual realisability")
    s.add_argument("scenario", nargs="?", default="pr-box")
    s.add_argument("--prior", type=float, nargs="+")
    s.add_argument("--responses", type=float, nargs="+", help="flattened xi rows for --prior")

    s = sub.add_parser("sample", parents=[common], help="Monte Carlo outcome counts")
    s.add_argument("model", nargs="?", default="toy")
    s.add_argument("--preps", default="psi,psi")
    s.add_argument("--shots", type=int, default=10000)
    s.add_argument("--shard", type=int, default=0)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    run = Run(args, argv)
    if args.seed is not None:
        run.seed = args.seed
    try:
        code = COMMANDS[args.command](run, args)
    except UsageError as exc:
        print(f"ontoscope: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalBreakdown as exc:
        print(f"ontoscope: solver failure: {exc}", file=sys.stderr)
        return run.finish(EXIT_SOLVER)
    except PreconditionFailed as exc:
        run.write_json("error.json", {"error": "PreconditionFailed", "check": exc.check, "message": str(exc)})
        print(f"ontoscope: precondition {exc.check!r} failed: {exc}", file=sys.stderr)
        return run.finish(EXIT_FINDING)
    except (OntoscopeError, OSError) as exc:
        print(f"ontoscope: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run.finish(code)


def digest_outputs(out_dir) -> dict:
    """sha256 of every output recorded in a run manifest."""
    manifest = json.loads((Path(out_dir) / "run_manifest.json").read_text())
    return {name: hashlib.sha256((Path(out_dir) / name).read_bytes()).hexdigest()
            for name in manifest["outputs"]}


if __name__ == "__main__":
    sys.exit(main())

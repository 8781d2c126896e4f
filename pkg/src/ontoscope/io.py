"""JSON and CSV formats for models, tables, witnesses and scenarios.

Table-valued fields are objects keyed by comma-joined label tuples. Writers
sort keys, omit zero entries of ontic distributions and responses, refuse
NaN/Inf and replace files atomically.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .contextuality import MeasurementScenario
from .errors import SchemaViolation, ShapeMismatch
from .independence import CCWitness
from .ontology import CondDist, EmpiricalModel, OnticSpace, OntologicalModel, ResponseFunctions

_LABEL = {"type": "string", "minLength": 1, "pattern": "^[^,]+$"}
_ROW = {"type": "object", "additionalProperties": {"type": "number"}}
_TABLE = {"type": "object", "additionalProperties": _ROW}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["ontic_labels", "sites", "prep_labels", "preps"],
    "properties": {
        "ontic_labels": {"type": "array", "items": _LABEL, "minItems": 1},
        "sites": {"type": "integer", "minimum": 1},
        "prep_labels": {"type": "array", "items": {"type": "array", "items": _LABEL, "minItems": 1}},
        "preps": _TABLE,
        "responses": _TABLE,
        "measured_sites": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
    "additionalProperties": False,
}

EMPIRICAL_SCHEMA = {
    "type": "object",
    "required": ["preps", "outcomes", "table"],
    "properties": {
        "preps": {"type": "array", "items": {"type": "array", "items": _LABEL, "minItems": 1}},
        "outcomes": {"type": "array", "items": _LABEL, "minItems": 1},
        "table": _TABLE,
    },
    "additionalProperties": False,
}

WITNESS_SCHEMA = {
    "type": "object",
    "required": ["common_past", "weight", "locals"],
    "properties": {
        "common_past": {"type": "array", "items": _LABEL, "minItems": 1},
        "weight": _ROW,
        "locals": {"type": "array", "items": _TABLE},
    },
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["measurements", "outcomes", "contexts", "tables"],
    "properties": {
        "measurements": {"type": "array", "items": _LABEL, "minItems": 1},
        "outcomes": {"type": "object", "additionalProperties": {"type": "array", "items": _LABEL}},
        "contexts": {"type": "array", "items": {"type": "array", "items": _LABEL}},
        "tables": {"type": "array", "items": _ROW},
    },
    "additionalProperties": False,
}


def _validate(doc, schema, what):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaViolation(f"{what}: {exc.message} at '{path}'") from None


def _key(labels) -> str:
    return ",".join(str(x) for x in labels)


def _split(key: str) -> tuple:
    return tuple(key.split(","))


def _dense_to_nested(table, row_labels, col_labels, keep_zeros=False) -> dict:
    """{row key: {col key: value}} from an array with row axes then column axes."""
    out = {}
    for ridx in np.ndindex(*[len(ls) for ls in row_labels]):
        row = {}
        for cidx in np.ndindex(*[len(ls) for ls in col_labels]):
            v = float(table[ridx + cidx])
            if keep_zeros or v != 0.0:
                row[_key(ls[i] for ls, i in zip(col_labels, cidx))] = v
        out[_key(ls[i] for ls, i in zip(row_labels, ridx))] = row
    return out


def _nested_to_dense(doc, row_labels, col_labels, what) -> np.ndarray:
    shape = tuple(len(ls) for ls in row_labels) + tuple(len(ls) for ls in col_labels)
    table = np.zeros(shape)
    for rkey, row in doc.items():
        rlab = _split(rkey)
        if len(rlab) != len(row_labels):
            raise SchemaViolation(f"{what}: key {rkey!r} has {len(rlab)} labels, expected {len(row_labels)}")
        try:
            ridx = tuple(ls.index(x) for ls, x in zip(row_labels, rlab))
        except ValueError:
            raise SchemaViolation(f"{what}: unknown label in {rkey!r}") from None
        for ckey, v in row.items():
            clab = _split(ckey)
            if len(clab) != len(col_labels):
                raise SchemaViolation(f"{what}: key {ckey!r} has {len(clab)} labels, expected {len(col_labels)}")
            try:
                cidx = tuple(ls.index(x) for ls, x in zip(col_labels, clab))
            except ValueError:
                raise SchemaViolation(f"{what}: unknown label in {ckey!r}") from None
            table[ridx + cidx] = float(v)
    return table


# --- conversions --------------------------------------------------------------

def dist_to_json(dist: CondDist) -> dict:
    labels = [list(dist.space.labels)] * dist.n
    return {
        "ontic_labels": list(dist.space.labels),
        "sites": dist.n,
        "prep_labels": [list(p) for p in dist.prep_labels],
        "preps": _dense_to_nested(dist.table, dist.prep_labels, labels),
    }


def model_to_json(model: OntologicalModel) -> dict:
    doc = dist_to_json(model.preps)
    k = model.responses.sites
    xi = np.asarray(model.responses.xi)
    doc["responses"] = _dense_to_nested(xi, [model.responses.outcomes], [model.space.labels] * k)
    if model.measured_sites != tuple(range(model.preps.n)):
        doc["measured_sites"] = list(model.measured_sites)
    return doc


def model_from_json(doc: dict):
    """Return ``(dist, model)``; ``model`` is None when no responses are given."""
    _validate(doc, MODEL_SCHEMA, "model")
    space = OnticSpace(tuple(doc["ontic_labels"]))
    n = doc["sites"]
    preps = tuple(tuple(p) for p in doc["prep_labels"])
    if len(preps) != n:
        raise SchemaViolation(f"model: {len(preps)} preparation sets for {n} sites")
    table = _nested_to_dense(doc["preps"], preps, [space.labels] * n, "preps")
    dist = CondDist(space, preps, table)
    if "responses" not in doc:
        return dist, None
    sites = tuple(doc.get("measured_sites", range(n)))
    outcomes = tuple(sorted(doc["responses"]))
    xi = _nested_to_dense(doc["responses"], [outcomes], [space.labels] * len(sites), "responses")
    return dist, OntologicalModel(space, dist, ResponseFunctions(outcomes, xi), sites)


def empirical_to_json(t: EmpiricalModel) -> dict:
    return {
        "preps": [list(p) for p in t.prep_labels],
        "outcomes": list(t.outcomes),
        "table": _dense_to_nested(t.table, t.prep_labels, [t.outcomes], keep_zeros=True),
    }


def empirical_from_json(doc: dict) -> EmpiricalModel:
    _validate(doc, EMPIRICAL_SCHEMA, "empirical model")
    preps = tuple(tuple(p) for p in doc["preps"])
    outcomes = tuple(doc["outcomes"])
    table = _nested_to_dense(doc["table"], preps, [outcomes], "table")
    return EmpiricalModel(preps, outcomes, table)


def witness_to_json(w: CCWitness, dist: CondDist) -> dict:
    locs = []
    for i, loc in enumerate(w.locals):
        locs.append(_dense_to_nested(loc, [dist.prep_labels[i], w.common_past], [dist.space.labels]))
    return {
        "common_past": list(w.common_past),
        "weight": {c: float(v) for c, v in zip(w.common_past, w.weight)},
        "locals": locs,
    }


def witness_from_json(doc: dict, dist: CondDist) -> CCWitness:
    _validate(doc, WITNESS_SCHEMA, "witness")
    cp = tuple(doc["common_past"])
    if len(doc["locals"]) != dist.n:
        raise ShapeMismatch(f"witness has {len(doc['locals'])} sites, distribution has {dist.n}")
    weight = _nested_to_dense({"w": doc["weight"]}, [("w",)], [cp], "weight")[0]
    locs = tuple(
        _nested_to_dense(loc, [dist.prep_labels[i], cp], [dist.space.labels], f"locals[{i}]")
        for i, loc in enumerate(doc["locals"])
    )
    return CCWitness(cp, weight, locs)


def scenario_to_json(s: MeasurementScenario) -> dict:
    tables = []
    for ctx, t in zip(s.contexts, s.tables):
        labels = [[str(o) for o in s.outcomes[m]] for m in ctx]
        row = {}
        for idx in np.ndindex(*t.shape):
            row[_key(ls[i] for ls, i in zip(labels, idx))] = float(t[idx])
        tables.append(row)
    return {
        "measurements": list(s.measurements),
        "outcomes": {m: [str(o) for o in s.outcomes[m]] for m in s.measurements},
        "contexts": [list(c) for c in s.contexts],
        "tables": tables,
    }


def scenario_from_json(doc: dict) -> MeasurementScenario:
    _validate(doc, SCENARIO_SCHEMA, "scenario")
    outcomes = {m: tuple(o) for m, o in doc["outcomes"].items()}
    contexts = [tuple(c) for c in doc["contexts"]]
    if len(doc["tables"]) != len(contexts):
        raise SchemaViolation("scenario: one table per context required")
    tables = []
    for ctx, row in zip(contexts, doc["tables"]):
        if any(m not in outcomes for m in ctx):
            raise SchemaViolation(f"scenario: context {ctx} uses an unknown measurement")
        tables.append(_nested_to_dense({"t": row}, [("t",)], [outcomes[m] for m in ctx], "tables")[0])
    return MeasurementScenario(tuple(doc["measurements"]), outcomes, contexts, tables)


# --- files --------------------------------------------------------------------

def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON ({exc})") from None


def atomic_write(path, text: str) -> str:
    """Write ``text`` to ``path`` via a temporary file; returns the sha256 digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else _fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def bundled(name: str) -> dict:
    """Load a JSON document shipped in the package data directory."""
    text = resources.files("ontoscope").joinpath("data", name).read_text(encoding="utf-8")
    return json.loads(text)


__all__ = [
    "MODEL_SCHEMA", "EMPIRICAL_SCHEMA", "WITNESS_SCHEMA", "SCENARIO_SCHEMA",
    "dist_to_json", "model_to_json", "model_from_json", "empirical_to_json", "empirical_from_json",
    "witness_to_json", "witness_from_json", "scenario_to_json", "scenario_from_json", "dumps",
    "read_json", "atomic_write", "csv_text", "file_digest", "bundled",
]

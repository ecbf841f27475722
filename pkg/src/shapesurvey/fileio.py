"""File formats: constraint specs, sample and replicate-weight CSVs, results.

Files use 1-based domain, axis and constraint-row numbering; the Python API
is 0-based.  Conversion happens only here.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .constraints import (
    ConstraintError,
    ConstraintMatrix,
    DomainGrid,
    IrreducibilityCertificate,
    build_monotone,
    build_partial_order,
    build_tree_order,
    check_irreducible,
)
from .estimation import SampleData
from .variance import ReplicateScheme

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Input file does not follow the expected layout."""


class ReducibleError(ValueError):
    """Constraint matrix has a redundant row (or its rows can cancel)."""

    def __init__(self, certificate: IrreducibilityCertificate):
        self.certificate = certificate
        super().__init__(_witness_text(certificate))


def _witness_text(cert: IrreducibilityCertificate) -> str:
    c = cert.coefficients
    terms = " + ".join(f"{c[j]:.6g}*row{j + 1}" for j in np.flatnonzero(c > 1e-12))
    if cert.witness_row is None:
        return f"reducible: 0 = {terms}"
    return f"reducible: row {cert.witness_row + 1} = {terms}"


def describe_certificate(cert: IrreducibilityCertificate) -> str:
    return "irreducible" if cert.irreducible else _witness_text(cert)


# -- constraint specifications ---------------------------------------------

def constraints_from_spec(spec: dict) -> ConstraintMatrix:
    """Build a constraint matrix from a parsed JSON spec.

    Accepted forms::

        {"grid": [D1, ...], "monotone": [{"axis": k, "direction": "inc"|"dec"}, ...]}
        {"tree": {"D": n, "root": r, "direction": "root_smallest"|"root_largest"}}
        {"pairs": [[lower, upper], ...], "D": n}
        {"matrix": [[...], ...]}
    """
    if not isinstance(spec, dict):
        raise SchemaError("constraint spec must be a JSON object")
    try:
        if "matrix" in spec:
            return ConstraintMatrix(spec["matrix"])
        if "grid" in spec:
            grid = DomainGrid(tuple(spec["grid"]))
            mono = spec.get("monotone")
            if not mono:
                raise ConstraintError("no constraints requested")
            axes = [int(item["axis"]) - 1 for item in mono]
            dirs = [item.get("direction", "inc") for item in mono]
            return build_monotone(grid, axes, dirs)
        if "tree" in spec:
            t = spec["tree"]
            return build_tree_order(int(t["D"]), int(t["root"]) - 1, t.get("direction", "root_smallest"))
        if "pairs" in spec:
            pairs = [(int(lo) - 1, int(hi) - 1) for lo, hi in spec["pairs"]]
            return build_partial_order(pairs, int(spec["D"]))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed constraint spec: {exc}") from exc
    raise SchemaError("constraint spec needs one of 'matrix', 'grid', 'tree' or 'pairs'")


def load_constraints(path, require_irreducible: bool = True) -> ConstraintMatrix:
    """Read a JSON constraint spec; reducible matrices raise :class:`ReducibleError`."""
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    A = constraints_from_spec(spec)
    if require_irreducible:
        cert = check_irreducible(A)
        if not cert:
            raise ReducibleError(cert)
    return A


# -- sample CSV -------------------------------------------------------------

SAMPLE_COLUMNS = ("unit_id", "y", "domain")


def read_sample_csv(path, D: Optional[int] = None, design: Optional[str] = "stratified_srswor"):
    """Read unit-level data.

    Columns: ``unit_id, y, pi`` (or ``weight`` = 1/pi), ``domain`` (1-based)
    and optionally ``stratum``.

    Returns ``(sample, unit_ids)``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in SAMPLE_COLUMNS if c not in cols]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        if "pi" not in cols and "weight" not in cols:
            raise SchemaError(f"{path}: need a 'pi' or 'weight' column")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        ids = [r["unit_id"] for r in rows]
        y = np.array([float(r["y"]) for r in rows])
        if "pi" in cols:
            pi = np.array([float(r["pi"]) for r in rows])
        else:
            pi = 1.0 / np.array([float(r["weight"]) for r in rows])
        dom = np.array([int(r["domain"]) for r in rows]) - 1
        stratum = None
        if "stratum" in cols:
            labels = [r["stratum"] for r in rows]
            _, stratum = np.unique(labels, return_inverse=True)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicate unit_id values")
    if not np.all(np.isfinite(y)):
        raise SchemaError(f"{path}: non-finite y")
    if np.any(dom < 0) or (D is not None and np.any(dom >= D)):
        raise SchemaError(f"{path}: domain labels must lie in 1..{D}")
    try:
        sample = SampleData(y, pi, dom, stratum, design=design)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return sample, ids


def write_sample_csv(sample: SampleData, path, unit_ids=None) -> None:
    """Write a sample in the layout :func:`read_sample_csv` reads (exact floats)."""
    if unit_ids is None:
        unit_ids = [str(i + 1) for i in range(sample.n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = ["unit_id", "y", "pi", "domain"] + (["stratum"] if sample.stratum is not None else [])
        w.writerow(header)
        for k in range(sample.n):
            row = [unit_ids[k], repr(float(sample.y[k])), repr(float(sample.pi[k])), int(sample.domain[k]) + 1]
            if sample.stratum is not None:
                row.append(int(sample.stratum[k]) + 1)
            w.writerow(row)


# -- replicate weights --------------------------------------------------------

def coefficients_sidecar(path) -> Path:
    """Default sidecar location: ``reps.csv`` -> ``reps.coef.json``."""
    p = Path(path)
    return p.with_name(p.stem + ".coef.json")


def read_replicate_weights(path, unit_ids, coefficients_path=None) -> ReplicateScheme:
    """Read replicate weights (``unit_id`` then one column per replicate).

    The sidecar JSON holds ``{"coefficients": [c_1, ..., c_G]}`` or
    ``{"scale": c}`` for a common coefficient.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if not header or header[0] != "unit_id" or len(header) < 3:
            raise SchemaError(f"{path}: expected 'unit_id' followed by at least two replicate columns")
        table = {}
        for row in reader:
            if len(row) != len(header):
                raise SchemaError(f"{path}: ragged row for unit {row[:1]}")
            try:
                table[row[0]] = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise SchemaError(f"{path}: {exc}") from exc
    missing = [u for u in unit_ids if u not in table]
    if missing:
        raise SchemaError(f"{path}: no replicate weights for unit(s) {missing[:5]}")
    rw = np.array([table[u] for u in unit_ids])
    G = rw.shape[1]
    cpath = Path(coefficients_path) if coefficients_path else coefficients_sidecar(path)
    try:
        side = json.loads(cpath.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"coefficient sidecar {cpath} not found") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{cpath}: invalid JSON ({exc})") from exc
    if "coefficients" in side:
        coef = np.asarray(side["coefficients"], dtype=float)
    elif "scale" in side:
        coef = np.full(G, float(side["scale"]))
    else:
        raise SchemaError(f"{cpath}: need 'coefficients' or 'scale'")
    if coef.shape != (G,):
        raise SchemaError(f"{cpath}: {coef.size} coefficients for {G} replicates")
    return ReplicateScheme(rw, coef)


# -- result schemas -----------------------------------------------------------

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}

ESTIMATE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "D", "m", "variance", "level", "face_J", "records"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": "estimate"},
        "D": {"type": "integer", "minimum": 2},
        "m": {"type": "integer", "minimum": 1},
        "variance": {"type": "string"},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "face_J": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "n_clamped": {"type": "integer", "minimum": 0},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["domain", "n_d", "N_hat", "unconstrained", "constrained",
                             "se_unconstrained", "se_constrained", "ci_lo", "ci_hi",
                             "pooled_block_id", "face_J"],
                "properties": {
                    "domain": {"type": "integer", "minimum": 1},
                    "n_d": {"type": "integer", "minimum": 1},
                    "N_hat": {"type": "number", "exclusiveMinimum": 0},
                    "unconstrained": _num,
                    "constrained": _num,
                    "se_unconstrained": {"type": "number", "minimum": 0},
                    "se_constrained": {"type": "number", "minimum": 0},
                    "ci_lo": _num,
                    "ci_hi": _num,
                    "pooled_block_id": {"type": ["integer", "null"], "minimum": 1},
                    "face_J": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                },
                "additionalProperties": False,
            },
        },
    },
}

_vec = {"type": "array", "items": _num}

SIMULATION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "name", "config", "ybar", "N_d", "estimators"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": "simulation"},
        "name": {"type": "string"},
        "config": {"type": "object"},
        "ybar": _vec,
        "N_d": _vec,
        "estimators": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["name", "wmse", "mean", "p025", "p975", "mc_variance",
                             "mean_variance", "coverage", "face_counts", "bad_face_rate"],
                "properties": {
                    "wmse": {"type": "number", "minimum": 0},
                    "mean": _vec,
                    "p025": _vec,
                    "p975": _vec,
                    "mc_variance": _vec,
                    "mean_variance": {"type": "object", "additionalProperties": _vec},
                    "coverage": {"type": "object", "additionalProperties": {
                        "type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}}},
                    "face_counts": {"type": "object", "additionalProperties": {"type": "integer"}},
                    "bad_face_rate": _num_or_null,
                },
            },
        },
    },
}


def dump_json(obj, path) -> None:
    """Deterministic JSON (sorted keys, shortest round-trip floats)."""
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def finite_or_none(x) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None

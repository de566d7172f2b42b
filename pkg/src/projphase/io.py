"""JSON documents for collections, measurements and results; CSV for sweeps.

Floats are written with ``repr``, the shortest string that round-trips, so
``load(dump(c))`` reproduces every matrix bit for bit.

Collection document::

    {"ambient_dim": M,
     "projections": [{"rank": k, "matrix": [[...], ...]}, ...],
     "provenance": {"seed": u64, "sampler": str, "note": str}}
"""

from __future__ import annotations

import csv
import json
import math
from numbers import Integral, Real
from pathlib import Path

import numpy as np

from .errors import InvalidRank, InvariantError, SchemaError
from .projections import Projection, ProjectionCollection
from .reconstruction import MeasurementVector

U64_MAX = 2**64 - 1


def _is_int(v):
    return isinstance(v, Integral) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, Real) and not isinstance(v, bool) and math.isfinite(v)


def collection_to_dict(collection):
    doc = {
        "ambient_dim": collection.ambient_dim,
        "projections": [
            {"rank": p.rank, "matrix": p.matrix.tolist()} for p in collection
        ],
    }
    if collection.provenance is not None:
        doc["provenance"] = dict(collection.provenance)
    return doc


def _matrix(raw, M, path):
    if not isinstance(raw, list) or len(raw) != M:
        raise SchemaError(f"expected a list of {M} rows", path)
    for r, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != M:
            raise SchemaError(f"expected {M} entries", f"{path}[{r}]")
        for c, v in enumerate(row):
            if not _is_num(v):
                raise SchemaError(f"not a finite number: {v!r}", f"{path}[{r}][{c}]")
    return np.array(raw, dtype=float)


def collection_from_dict(doc):
    """Parse and validate a collection document.

    Raises SchemaError (with the path of the bad field) for layout problems
    and InvariantError when a matrix is not an orthogonal projection.
    """
    if not isinstance(doc, dict):
        raise SchemaError("document must be a JSON object")
    M = doc.get("ambient_dim")
    if not _is_int(M) or M < 2:
        raise SchemaError(f"must be an integer >= 2, got {M!r}", "ambient_dim")
    items = doc.get("projections")
    if not isinstance(items, list):
        raise SchemaError("missing or not a list", "projections")
    if not items:
        raise SchemaError("collection must contain at least one projection", "projections")

    projections = []
    for i, item in enumerate(items):
        path = f"projections[{i}]"
        if not isinstance(item, dict):
            raise SchemaError("expected an object", path)
        k = item.get("rank")
        if not _is_int(k):
            raise SchemaError(f"must be an integer, got {k!r}", f"{path}.rank")
        P = _matrix(item.get("matrix"), M, f"{path}.matrix")
        try:
            projections.append(Projection(P, int(k)))
        except InvalidRank as exc:
            raise SchemaError(str(exc), f"{path}.rank") from exc
        except InvariantError as exc:
            raise InvariantError(f"{path}.matrix: {exc}", exc.violations) from exc

    prov = doc.get("provenance")
    if prov is not None:
        if not isinstance(prov, dict):
            raise SchemaError("expected an object", "provenance")
        seed = prov.get("seed")
        if seed is not None and not (_is_int(seed) and 0 <= seed <= U64_MAX):
            raise SchemaError(f"must be an unsigned 64-bit integer, got {seed!r}", "provenance.seed")
        for key in ("sampler", "note"):
            if key in prov and not isinstance(prov[key], str):
                raise SchemaError("must be a string", f"provenance.{key}")
        ranks = prov.get("ranks")
        if ranks is not None and list(ranks) != [p.rank for p in projections]:
            raise SchemaError("rank profile disagrees with the projections", "provenance.ranks")
    return ProjectionCollection(tuple(projections), prov)


def dumps(obj):
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def save_collection(collection, path):
    Path(path).write_text(dumps(collection_to_dict(collection)))


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc


def load_collection(path):
    return collection_from_dict(load_json(path))


def measurements_from_dict(doc):
    if isinstance(doc, list):
        doc = {"values": doc}
    if not isinstance(doc, dict) or not isinstance(doc.get("values"), list):
        raise SchemaError("missing or not a list", "values")
    for i, v in enumerate(doc["values"]):
        if not _is_num(v):
            raise SchemaError(f"not a finite number: {v!r}", f"values[{i}]")
    return MeasurementVector(doc["values"], doc.get("collection_ref"))


SWEEP_COLUMNS = [
    "M",
    "N",
    "rank_profile",
    "trials",
    "injective_count",
    "witness_count",
    "inconclusive_count",
    "median_min_defect",
    "median_witness_residual",
    "wall_time_s",
]

RECON_COLUMNS = [
    "seed",
    "M",
    "N",
    "rank_profile",
    "residual",
    "recovery_error",
    "restarts_used",
    "converged",
]


def write_csv(rows, path, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in columns})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

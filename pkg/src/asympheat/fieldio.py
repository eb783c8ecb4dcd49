"""Portable on-disk formats for remainder fields and charts.

Field: ``<stem>.json`` header plus ``<stem>.f64`` raw little-endian doubles in
row-major order.  Chart: a single JSON document with coefficient vectors keyed
by the index ``k`` (mode ordering as in :mod:`asympheat.sphere`).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .spaces import AsymptoticChart, AsymptoticFunction, CutoffSpec, RemainderField
from .sphere import SphereFunction

__all__ = [
    "FIELD_FORMAT",
    "FieldFormatError",
    "serialize_field",
    "deserialize_field",
    "chart_to_dict",
    "chart_from_dict",
    "save_chart",
    "load_chart",
    "serialize_asymptotic",
    "deserialize_asymptotic",
]

FIELD_FORMAT = "asympheat-field/1"


class FieldFormatError(ValueError):
    pass


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".json", ".f64") else p


def serialize_field(f: RemainderField, path) -> Path:
    """Write ``f`` as ``<stem>.json`` + ``<stem>.f64``; returns the header path."""
    if np.iscomplexobj(f.data):
        raise FieldFormatError("only real fields can be serialized")
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": FIELD_FORMAT,
        "d": f.d,
        "shape": list(f.shape),
        "spacing": f.spacing,
        "origin": list(f.origin),
        "dtype": "f64",
        "order": "row-major",
    }
    stem.with_suffix(".f64").write_bytes(np.ascontiguousarray(f.data, dtype="<f8").tobytes())
    hp = stem.with_suffix(".json")
    hp.write_text(json.dumps(header, indent=2) + "\n")
    return hp


def deserialize_field(path) -> RemainderField:
    stem = _stem(path)
    try:
        header = json.loads(stem.with_suffix(".json").read_text())
    except json.JSONDecodeError as exc:
        raise FieldFormatError(f"malformed field header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FIELD_FORMAT:
        raise FieldFormatError(f"not an {FIELD_FORMAT} header")
    for key in ("d", "shape", "spacing", "origin", "dtype", "order"):
        if key not in header:
            raise FieldFormatError(f"field header misses {key!r}")
    if header["dtype"] != "f64" or header["order"] != "row-major":
        raise FieldFormatError("only f64 row-major payloads are supported")
    shape = tuple(int(n) for n in header["shape"])
    if len(shape) != header["d"]:
        raise FieldFormatError("header shape does not match d")
    raw = stem.with_suffix(".f64").read_bytes()
    expected = 8 * math.prod(shape)
    if len(raw) != expected:
        raise FieldFormatError(
            f"shape mismatch: payload has {len(raw)} bytes, shape {list(shape)} needs {expected}"
        )
    data = np.frombuffer(raw, dtype="<f8").astype(float).reshape(shape)
    if not np.all(np.isfinite(data)):
        raise FieldFormatError("non-finite payload")
    f = RemainderField(int(header["d"]), shape, float(header["spacing"]), data)
    if not np.allclose(f.origin, header["origin"], rtol=0, atol=1e-12 * (1 + f.half_width)):
        raise FieldFormatError("header origin does not describe a centred box")
    return f


def chart_to_dict(chart: AsymptoticChart) -> dict:
    out = {
        "d": chart.d,
        "n": chart.n,
        "N": chart.N,
        "N_star": chart.N_star,
        "L_max": chart.L_max,
        "coeffs": {str(k): [float(c) for c in chart[k].coeffs] for k in chart.ks},
    }
    if chart.p is not None:
        out["p"] = chart.p
    return out


def chart_from_dict(doc: dict) -> AsymptoticChart:
    try:
        d, n, N, Ns, L = (int(doc[k]) for k in ("d", "n", "N", "N_star", "L_max"))
        coeffs = [SphereFunction(d, L, np.asarray(doc["coeffs"][str(k)], dtype=float))
                  for k in range(n, Ns + 1)]
    except (KeyError, TypeError) as exc:
        raise FieldFormatError(f"malformed chart document: {exc}") from exc
    return AsymptoticChart(d, n, N, Ns, coeffs, doc.get("p"))


def save_chart(chart: AsymptoticChart, path, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = chart_to_dict(chart)
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_chart(path) -> AsymptoticChart:
    return chart_from_dict(json.loads(Path(path).read_text()))


def serialize_asymptotic(v: AsymptoticFunction, path) -> Path:
    """Write remainder as ``<stem>.{json,f64}`` and chart plus cutoff as ``<stem>.chart.json``."""
    stem = _stem(path)
    serialize_field(v.remainder, stem)
    cut = {"kind": v.cutoff.kind, "r0": v.cutoff.r0, "r1": v.cutoff.r1}
    save_chart(v.chart, stem.with_name(stem.name + ".chart.json"), {"cutoff": cut})
    return stem


def deserialize_asymptotic(path) -> AsymptoticFunction:
    stem = _stem(path)
    doc = json.loads(stem.with_name(stem.name + ".chart.json").read_text())
    cut = CutoffSpec(**doc.get("cutoff", {}))
    return AsymptoticFunction(chart_from_dict(doc), deserialize_field(stem), cut)

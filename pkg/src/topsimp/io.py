"""Field, diagram, polyline and report files.

A field is stored as a raw little-endian array (x fastest) next to a JSON
header ``<name>.json`` holding ``dims``, ``dtype`` ("f32" or "f64") and
``layout`` ("x-fastest"). The header path may be given directly or derived
from the raw path.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import InputError, ScalarField
from .persistence import PersistenceDiagram, PersistencePair

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
DIAGRAM_HEADER = ["dim", "birth", "death", "birthVertex", "deathVertex", "finite"]


def header_path(path) -> Path:
    path = Path(path)
    return path if path.suffix == ".json" else path.with_suffix(".json")


def _raw_path(path, header: dict) -> Path:
    path = Path(path)
    if path.suffix != ".json":
        return path
    raw = header.get("file")
    if raw is None:
        return path.with_suffix(".raw")
    return path.parent / raw


def read_field(path) -> tuple[ScalarField, str]:
    """Read a field and return it with its stored dtype tag."""
    hp = header_path(path)
    try:
        header = json.loads(hp.read_text())
    except FileNotFoundError:
        raise InputError(f"missing header {hp}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"bad header {hp}: {exc}") from None
    if not isinstance(header, dict):
        raise InputError(f"bad header {hp}: expected an object")
    dims = header.get("dims")
    tag = header.get("dtype")
    layout = header.get("layout", "x-fastest")
    if (not isinstance(dims, list) or not 1 <= len(dims) <= 3
            or not all(isinstance(n, int) and n > 0 for n in dims)):
        raise InputError(f"bad header {hp}: dims must list 1 to 3 positive integers")
    if tag not in DTYPES:
        raise InputError(f"bad header {hp}: dtype must be one of {sorted(DTYPES)}")
    if layout != "x-fastest":
        raise InputError(f"bad header {hp}: unsupported layout {layout!r}")
    rp = _raw_path(path, header)
    try:
        data = rp.read_bytes()
    except FileNotFoundError:
        raise InputError(f"missing data file {rp}") from None
    dt = DTYPES[tag]
    expected = int(np.prod(dims)) * dt.itemsize
    if len(data) != expected:
        raise InputError(f"{rp} holds {len(data)} bytes, header requires {expected}")
    values = np.frombuffer(data, dtype=dt)
    return ScalarField(tuple(dims), values.astype(np.float64)), tag


def write_field(path, field: ScalarField, dtype: str = "f64") -> Path:
    """Write ``field`` as raw data at ``path`` plus its JSON header; returns the header path."""
    if dtype not in DTYPES:
        raise InputError(f"dtype must be one of {sorted(DTYPES)}")
    path = Path(path)
    raw = path.with_suffix(".raw") if path.suffix == ".json" else path
    raw.write_bytes(np.asarray(field.values, dtype=DTYPES[dtype]).tobytes())
    hp = header_path(raw)
    if hp == raw:
        raise InputError("the raw data file cannot use the .json suffix")
    hp.write_text(json.dumps({"dims": list(field.dims), "dtype": dtype, "layout": "x-fastest",
                              "file": raw.name}, indent=2))
    return hp


def _sorted_pairs(D):
    return sorted(D, key=lambda p: (p.dim, p.birth, p.death, p.birth_vertex, p.death_vertex))


def write_diagram(target, D) -> None:
    """Write ``D`` as CSV to a path or an open text stream."""
    if hasattr(target, "write"):
        _diagram_rows(target, D)
        return
    with open(target, "w", newline="") as fh:
        _diagram_rows(fh, D)


def _diagram_rows(fh, D):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DIAGRAM_HEADER)
    for p in _sorted_pairs(D):
        w.writerow([p.dim, repr(float(p.birth)), repr(float(p.death)), p.birth_vertex, p.death_vertex,
                    int(p.finite)])


def read_diagram(path) -> PersistenceDiagram:
    """Parse a diagram CSV. Simplex ids are not stored and come back as -1."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise InputError(f"missing diagram {path}") from None
    pairs = []
    with fh:
        rows = csv.reader(fh)
        head = next(rows, None)
        if head != DIAGRAM_HEADER:
            raise InputError(f"{path}: expected header {','.join(DIAGRAM_HEADER)}")
        for n, row in enumerate(rows, start=2):
            if not row:
                continue
            try:
                dim, b, d, bv, dv, fin = row
                finite = {"1": True, "0": False}[fin.strip()]
                pairs.append(PersistencePair(int(dim), -1, -1, int(bv), int(dv), float(b), float(d), finite))
            except (ValueError, KeyError):
                raise InputError(f"{path}: malformed row {n}: {row}") from None
    return PersistenceDiagram(_sorted_pairs(pairs))


def write_polylines(path, filaments) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["polylineId", "x", "y", "z"])
        for i, f in enumerate(filaments):
            for x, y, z in f.points:
                w.writerow([i, repr(float(x)), repr(float(y)), repr(float(z))])


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_plain))

"""CSV/JSON serialisation of grids, compositions, flag matrices and dendrograms.

Floats are written with ``repr`` so files round-trip exactly and identical
inputs give byte-identical outputs.  Metadata that belongs with a CSV table
is written as leading ``# key: json`` comment lines.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bayes import Box, ClrGrid, DensityGrid, Grid
from .clustering import Dendrogram
from .ddc import CellFlagMatrix
from .decomposition import InformationComposition, PART_LABELS
from .errors import FormatError

__all__ = [
    "fmt",
    "grid_to_json",
    "grid_from_json",
    "grid_to_csv",
    "grid_from_csv",
    "write_table",
    "read_table",
    "write_json",
    "write_compositions",
    "read_compositions",
    "write_coefficients",
    "write_flag_matrix",
    "write_dendrogram",
    "read_dendrogram",
    "sha256",
]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == 0.0:
            return "0.0"
        return repr(v)
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def grid_to_json(f: DensityGrid | ClrGrid, **meta) -> dict:
    kind = "density" if isinstance(f, DensityGrid) else "clr"
    out = {
        "kind": kind,
        "box": {"lower": list(f.grid.box.lower), "upper": list(f.grid.box.upper)},
        "shape": list(f.grid.shape),
        "values": f.values.ravel(order="C").tolist(),
    }
    if meta:
        out["meta"] = meta
    return out


def grid_from_json(data) -> DensityGrid | ClrGrid:
    if isinstance(data, (str, Path)):
        data = json.loads(Path(data).read_text(encoding="utf-8"))
    try:
        grid = Grid(Box(tuple(data["box"]["lower"]), tuple(data["box"]["upper"])),
                    tuple(data["shape"]))
        values = np.asarray(data["values"], dtype=float).reshape(grid.shape)
        kind = data.get("kind", "density")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"not a grid container: {exc}") from exc
    return DensityGrid(grid, values) if kind == "density" else ClrGrid(grid, values)


def grid_to_csv(f: DensityGrid | ClrGrid, path=None) -> str:
    """One row per node: coordinates then value, last axis fastest."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = f.grid.ndim
    w.writerow([f"x{k + 1}" for k in range(d)] + ["value"])
    pts = f.grid.points()
    for p, v in zip(pts, f.values.ravel(order="C")):
        w.writerow([fmt(c) for c in p] + [fmt(v)])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    return text


def grid_from_csv(source, kind: str = "density") -> DensityGrid | ClrGrid:
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source) else source
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][-1] != "value":
        raise FormatError("grid CSV needs a header ending in 'value'")
    data = np.array(rows[1:], dtype=float)
    d = data.shape[1] - 1
    axes = [np.unique(data[:, k]) for k in range(d)]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != data.shape[0]:
        raise FormatError("grid CSV does not describe a full tensor grid")
    grid = Grid(Box(tuple(a[0] for a in axes), tuple(a[-1] for a in axes)), shape)
    order = np.lexsort(tuple(data[:, k] for k in reversed(range(d))))
    values = data[order, -1].reshape(shape)
    return DensityGrid(grid, values) if kind == "density" else ClrGrid(grid, values)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {json.dumps(_plain(value), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_table(path) -> tuple[dict, list[str], list[list[str]]]:
    """Return ``(meta, header, rows)`` of a table written by :func:`write_table`."""
    meta = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = []
    for line in lines:
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise FormatError(f"{path}: empty table")
    return meta, rows[0], rows[1:]


def write_compositions(path, ids: Sequence[str], comps: Sequence[InformationComposition],
                       meta: dict | None = None) -> Path:
    labels = comps[0].labels if comps else PART_LABELS
    rows = [[i, *c.parts] for i, c in zip(ids, comps)]
    return write_table(path, ["compartment", *labels], rows, meta)


def read_compositions(path) -> tuple[list[str], list[InformationComposition]]:
    _, header, rows = read_table(path)
    if not header or header[0] != "compartment" or len(header) < 2:
        raise FormatError("composition CSV needs a 'compartment' column followed by parts")
    labels = tuple(header[1:])
    ids, comps = [], []
    for row in rows:
        ids.append(row[0])
        comps.append(InformationComposition(tuple(float(v) for v in row[1:]), labels))
    return ids, comps


def write_coefficients(path, ids: Sequence[str], coefs: np.ndarray, basis_meta: dict,
                       extra: dict | None = None) -> Path:
    K = coefs.shape[1]
    meta = {"basis": basis_meta, **(extra or {})}
    rows = [[i, *row] for i, row in zip(ids, coefs)]
    return write_table(path, ["compartment", *[f"b{k + 1}" for k in range(K)]], rows, meta)


def write_flag_matrix(stem, cells: CellFlagMatrix, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<stem>_levels.csv`` and ``<stem>_flags.csv``."""
    stem = Path(stem)
    meta = {**cells.metadata(), **(extra or {})}
    header = ["row", *cells.labels, "row_flag"]
    lv = [[r, *lv, flag] for r, lv, flag in zip(cells.row_labels, cells.levels, cells.row_flags)]
    fl = [[r, *fl, flag] for r, fl, flag in zip(cells.row_labels, cells.cell_flags, cells.row_flags)]
    a = write_table(stem.with_name(stem.name + "_levels.csv"), header, lv, meta)
    b = write_table(stem.with_name(stem.name + "_flags.csv"), header, fl, meta)
    return a, b


def write_dendrogram(path, dend: Dendrogram, extra: dict | None = None) -> Path:
    data = dend.to_dict()
    if extra:
        data.update(extra)
    return write_json(path, data)


def read_dendrogram(path) -> Dendrogram:
    try:
        return Dendrogram.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: not a dendrogram file: {exc}") from exc


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

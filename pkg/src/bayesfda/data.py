"""Sample records: CSV ingestion, validation and compartmentalisation."""
from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .density import SampleMatrix
from .errors import FormatError, InvalidInputError
from .io import fmt

__all__ = [
    "SampleRecord",
    "Rejection",
    "IngestReport",
    "CompartmentDataset",
    "PartitionReport",
    "COLUMNS",
    "ingest",
    "parse_records",
    "partition",
    "write_samples",
]

COLUMNS = ("sample_id", "district", "cu", "pb", "zn")
ELEMENT_COLUMNS = ("cu", "pb", "zn")


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    district: str
    cu: float
    pb: float
    zn: float

    def __post_init__(self):
        if not str(self.district).strip():
            raise InvalidInputError("compartment code must be non-empty")
        for name in ELEMENT_COLUMNS:
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise InvalidInputError(f"{name} must be positive and finite, got {v}")

    @property
    def concentrations(self) -> tuple[float, float, float]:
        return (self.cu, self.pb, self.zn)


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str
    raw: str


@dataclass
class IngestReport:
    records: list[SampleRecord]
    rejections: list[Rejection]

    @property
    def n_read(self) -> int:
        return len(self.records) + len(self.rejections)

    def summary(self) -> dict:
        return {
            "rows_read": self.n_read,
            "accepted": len(self.records),
            "rejected": len(self.rejections),
            "rejections": [
                {"line": r.line, "reason": r.reason, "raw": r.raw} for r in self.rejections
            ],
        }


def _parse_row(row: list[str]) -> SampleRecord | str:
    if len(row) != len(COLUMNS):
        return f"expected {len(COLUMNS)} fields, got {len(row)}"
    sid, district = row[0].strip(), row[1].strip()
    if not sid:
        return "missing sample id"
    if not district:
        return "missing compartment code"
    values = []
    for name, raw in zip(ELEMENT_COLUMNS, row[2:]):
        raw = raw.strip()
        if not raw:
            return f"missing {name}"
        try:
            v = float(raw)
        except ValueError:
            return f"non-numeric {name}"
        if not math.isfinite(v):
            return f"non-finite {name}"
        if v <= 0:
            return "non-positive concentration"
        values.append(v)
    return SampleRecord(sid, district, *values)


def parse_records(text: str) -> IngestReport:
    """Parse CSV text with header ``sample_id,district,cu,pb,zn``."""
    if not text.strip():
        raise InvalidInputError("empty input file")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InvalidInputError("empty input file") from None
    names = [h.strip().lower() for h in header]
    if tuple(names) != COLUMNS:
        missing = [c for c in COLUMNS if c not in names]
        detail = f"missing columns {missing}" if missing else f"got {header}"
        raise FormatError(f"header must be {','.join(COLUMNS)}: {detail}")
    records, rejections = [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        parsed = _parse_row(row)
        if isinstance(parsed, str):
            rejections.append(Rejection(line_no, parsed, ",".join(row)))
        else:
            records.append(parsed)
    return IngestReport(records, rejections)


def ingest(path, format: str = "csv") -> IngestReport:
    if format != "csv":
        raise FormatError(f"unsupported input format {format!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    return parse_records(text)


@dataclass(frozen=True, eq=False)
class CompartmentDataset:
    code: str
    records: tuple[SampleRecord, ...] = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def samples(self) -> SampleMatrix:
        return SampleMatrix(np.array([r.concentrations for r in self.records]), ("Cu", "Pb", "Zn"))


@dataclass
class PartitionReport:
    datasets: list[CompartmentDataset]
    excluded: list[tuple[str, int, str]]

    @property
    def total(self) -> int:
        return sum(d.count for d in self.datasets) + sum(n for _, n, _ in self.excluded)

    def summary(self) -> dict:
        return {
            "included": {d.code: d.count for d in self.datasets},
            "excluded": [{"compartment": c, "count": n, "reason": r} for c, n, r in self.excluded],
        }


def partition(records: Sequence[SampleRecord], n_min: int = 0) -> PartitionReport:
    """Group records by compartment code, excluding groups smaller than ``n_min``.

    Compartments are returned sorted by code.
    """
    if not records:
        raise InvalidInputError("no records to partition")
    groups: dict[str, list[SampleRecord]] = OrderedDict()
    for r in records:
        groups.setdefault(r.district, []).append(r)
    datasets, excluded = [], []
    for code in sorted(groups):
        recs = groups[code]
        if len(recs) < n_min:
            excluded.append((code, len(recs), f"{len(recs)} samples < n_min={n_min}"))
        else:
            datasets.append(CompartmentDataset(code, tuple(recs)))
    return PartitionReport(datasets, excluded)


def write_samples(path, records: Iterable[SampleRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([r.sample_id, r.district, fmt(r.cu), fmt(r.pb), fmt(r.zn)])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path

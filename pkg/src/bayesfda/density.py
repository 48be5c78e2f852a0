"""Kernel density estimation of concentration data on a common log-scale box."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bayes import Box, DensityGrid, Grid, integrate
from .errors import DegenerateDataError, InsufficientDataError, InvalidInputError, OutOfSupportError

__all__ = [
    "SampleMatrix",
    "BandwidthSpec",
    "common_support",
    "silverman_bandwidth",
    "kde",
    "default_shape",
    "EPS_FLOOR",
    "PAD_FACTOR",
]

ELEMENTS = ("Cu", "Pb", "Zn")
EPS_FLOOR = 1e-9
PAD_FACTOR = 0.5
N_MIN_UNIVARIATE = 30
N_MIN_TRIVARIATE = 100
DEFAULT_SHAPES = {1: (128,), 2: (64, 64), 3: (32, 32, 32)}


def default_shape(ndim: int) -> tuple[int, ...]:
    return DEFAULT_SHAPES[ndim]


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """Strictly positive concentrations, one row per sample.

    ``labels`` name the columns (elements).  ``n_min`` is checked only when
    given, since small matrices are legitimate in tests and oracles.
    """

    data: np.ndarray
    labels: tuple[str, ...] = ELEMENTS

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InvalidInputError("sample matrix must be a non-empty 2-D array")
        if not 1 <= arr.shape[1] <= 3:
            raise InvalidInputError(f"sample matrix needs 1 to 3 columns, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise InvalidInputError("concentrations must be finite and strictly positive")
        labels = tuple(self.labels)
        if len(labels) != arr.shape[1]:
            labels = labels[: arr.shape[1]] if len(labels) > arr.shape[1] else tuple(
                f"x{k + 1}" for k in range(arr.shape[1])
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def ndim(self) -> int:
        return self.data.shape[1]

    def log(self) -> np.ndarray:
        return np.log(self.data)

    def columns(self, names: Sequence[str]) -> "SampleMatrix":
        idx = [self.labels.index(name) for name in names]
        return SampleMatrix(self.data[:, idx], tuple(names))

    def check_size(self, n_min: int) -> None:
        if self.n < n_min:
            raise InsufficientDataError(f"{self.n} samples, at least {n_min} required")


@dataclass(frozen=True)
class BandwidthSpec:
    """Either ``rule='silverman'`` or ``rule='fixed'`` with per-axis ``values``."""

    rule: str = "silverman"
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.rule not in ("silverman", "fixed"):
            raise InvalidInputError(f"unknown bandwidth rule {self.rule!r}")
        if self.rule == "fixed":
            if not self.values:
                raise InvalidInputError("fixed bandwidth needs values")
            vals = tuple(float(v) for v in np.atleast_1d(self.values))
            if any(not np.isfinite(v) or v <= 0 for v in vals):
                raise InvalidInputError(f"bandwidths must be positive, got {vals}")
            object.__setattr__(self, "values", vals)

    def resolve(self, logx: np.ndarray) -> np.ndarray:
        d = logx.shape[1]
        if self.rule == "silverman":
            return np.array([silverman_bandwidth(logx[:, k]) for k in range(d)])
        vals = self.values
        if len(vals) == 1:
            vals = vals * d
        if len(vals) != d:
            raise InvalidInputError(f"{len(vals)} bandwidths for {d} dimensions")
        return np.array(vals)


def _logs(dataset) -> np.ndarray:
    if isinstance(dataset, SampleMatrix):
        return dataset.log()
    arr = np.asarray(dataset, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidInputError("concentrations must be finite and strictly positive")
    return np.log(arr)


def common_support(datasets, pad_factor: float = PAD_FACTOR) -> Box:
    """Shared log-scale box enclosing every dataset with a margin.

    Per column, the box spans the pooled minimum and maximum of the log
    values, widened on both sides by ``pad_factor`` times the pooled
    standard deviation of the log values.
    """
    if isinstance(datasets, SampleMatrix):
        datasets = [datasets]
    logs = [_logs(d) for d in datasets]
    if not logs:
        raise InvalidInputError("common_support needs at least one dataset")
    widths = {x.shape[1] for x in logs}
    if len(widths) != 1:
        raise InvalidInputError("datasets have different numbers of columns")
    pooled = np.vstack(logs)
    sd = pooled.std(axis=0, ddof=1) if pooled.shape[0] > 1 else np.zeros(pooled.shape[1])
    flat = np.ptp(pooled, axis=0) == 0
    if np.any(flat | ~(sd > 0)):
        bad = [k for k in range(pooled.shape[1]) if flat[k] or not sd[k] > 0]
        raise DegenerateDataError(f"zero spread in column(s) {bad}", columns=bad)
    pad = pad_factor * sd
    lower = pooled.min(axis=0) - pad
    upper = pooled.max(axis=0) + pad
    return Box(tuple(lower), tuple(upper))


def silverman_bandwidth(x) -> float:
    """Silverman's rule ``0.9 * min(sd, IQR / 1.34) * n ** (-1/5)``.

    A zero IQR with positive standard deviation falls back to the
    standard deviation alone.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"bandwidth needs at least 2 values, got {n}")
    if np.ptp(x) == 0:
        raise DegenerateDataError("zero spread: bandwidth undefined")
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = [s for s in (sd, (q75 - q25) / 1.34) if s > 0]
    if not spread:
        raise DegenerateDataError("zero spread: bandwidth undefined")
    return 0.9 * min(spread) * n ** (-0.2)


def _kernel_matrix(nodes: np.ndarray, centres: np.ndarray, h: float) -> np.ndarray:
    u = (nodes[:, None] - centres[None, :]) / h
    return np.exp(-0.5 * u * u) / (h * np.sqrt(2 * np.pi))


def kde(samples, grid: Grid, bw: BandwidthSpec | None = None,
        eps_floor: float = EPS_FLOOR) -> DensityGrid:
    """Gaussian product-kernel density of ``ln(samples)`` on ``grid``.

    Node values below ``eps_floor * max`` are raised to that floor before
    normalising to unit integral, so the result is strictly positive.

    Raises
    ------
    OutOfSupportError
        If any log-sample lies outside the grid box.
    """
    logx = _logs(samples)
    if logx.shape[1] != grid.ndim:
        raise InvalidInputError(
            f"{logx.shape[1]}-column samples on a {grid.ndim}-D grid"
        )
    inside = grid.box.contains(logx)
    if not np.all(inside):
        bad = int(np.flatnonzero(~inside)[0])
        raise OutOfSupportError(
            f"sample {bad} (log values {logx[bad].tolist()}) lies outside the box {grid.box}"
        )
    h = (bw or BandwidthSpec()).resolve(logx)
    mats = [_kernel_matrix(grid.axes[k], logx[:, k], h[k]) for k in range(grid.ndim)]
    if grid.ndim == 1:
        values = mats[0].sum(axis=1)
    elif grid.ndim == 2:
        values = mats[0] @ mats[1].T
    else:
        values = np.einsum("is,js,ks->ijk", *mats, optimize=True)
    values = values / logx.shape[0]
    peak = float(values.max())
    if not peak > 0:
        raise InvalidInputError("kernel estimate vanished on the whole grid")
    values = np.maximum(values, eps_floor * peak)
    return DensityGrid(grid, values / integrate(values, grid))

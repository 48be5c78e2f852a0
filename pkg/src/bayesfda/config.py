"""Analysis configuration and its ``key = value`` text format.

Example file::

    # resolution of the density grids
    grid_1d = 128
    grid_2d = 64
    grid_3d = 32
    bandwidth = silverman
    p_cut = 0.99
    cluster_k = auto
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import InvalidInputError

__all__ = ["AnalysisConfig", "from_mapping", "load_config", "parse_config", "OUTPUT_ENV"]

OUTPUT_ENV = "BAYESFDA_OUTPUT_DIR"


@dataclass(frozen=True)
class AnalysisConfig:
    """Every tunable of a pipeline run.

    Grid sizes are nodes per axis.  ``bandwidth`` is ``"silverman"`` or a
    positive number used as a fixed log-scale bandwidth on every axis.
    ``cluster_k`` is a positive integer or ``"auto"``.
    """

    grid_1d: int = 128
    grid_2d: int = 64
    grid_3d: int = 32
    bandwidth: str = "silverman"
    eps_floor: float = 1e-9
    pad_factor: float = 0.5
    spline_k: int = 13
    spline_order: int = 4
    p_cut: float = 0.99
    agg_fraction: float = 0.30
    cluster_k: str = "auto"
    n_min: int = 100
    seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        for name in ("grid_1d", "grid_2d", "grid_3d"):
            v = getattr(self, name)
            if not 4 <= v <= 1024:
                raise InvalidInputError(f"{name} must lie in [4, 1024], got {v}")
        if self.grid_3d > 128:
            raise InvalidInputError(f"grid_3d must be at most 128, got {self.grid_3d}")
        if self.bandwidth != "silverman":
            try:
                h = float(self.bandwidth)
            except ValueError:
                raise InvalidInputError(
                    f"bandwidth must be 'silverman' or a positive number, got {self.bandwidth!r}"
                ) from None
            if not (math.isfinite(h) and h > 0):
                raise InvalidInputError(f"bandwidth must be positive, got {h}")
        if not 0 < self.eps_floor < 1:
            raise InvalidInputError(f"eps_floor must lie in (0, 1), got {self.eps_floor}")
        if not 0 <= self.pad_factor <= 10:
            raise InvalidInputError(f"pad_factor must lie in [0, 10], got {self.pad_factor}")
        if not 2 <= self.spline_order <= 6:
            raise InvalidInputError(f"spline_order must lie in [2, 6], got {self.spline_order}")
        if self.spline_k < self.spline_order:
            raise InvalidInputError("spline_k must be at least spline_order")
        if self.spline_k >= self.grid_1d:
            raise InvalidInputError("spline_k must be smaller than grid_1d")
        if not 0.5 < self.p_cut < 1:
            raise InvalidInputError(f"p_cut must lie in (0.5, 1), got {self.p_cut}")
        if not 0 < self.agg_fraction <= 1:
            raise InvalidInputError(f"agg_fraction must lie in (0, 1], got {self.agg_fraction}")
        if self.cluster_k != "auto":
            try:
                k = int(self.cluster_k)
            except ValueError:
                raise InvalidInputError(f"cluster_k must be 'auto' or an integer, got {self.cluster_k!r}") from None
            if k < 1:
                raise InvalidInputError(f"cluster_k must be positive, got {k}")
        if self.n_min < 4:
            raise InvalidInputError(f"n_min must be at least 4, got {self.n_min}")
        if self.seed < 0:
            raise InvalidInputError(f"seed must be non-negative, got {self.seed}")

    @property
    def fixed_bandwidth(self) -> float | None:
        return None if self.bandwidth == "silverman" else float(self.bandwidth)

    @property
    def k(self) -> int | None:
        return None if self.cluster_k == "auto" else int(self.cluster_k)

    def to_dict(self) -> dict:
        return asdict(self)

    def echo(self) -> dict:
        """Config as recorded in output metadata (without the output directory)."""
        d = self.to_dict()
        d.pop("output_dir")
        return d

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_dict().items())

    def with_overrides(self, **kw) -> "AnalysisConfig":
        return from_mapping({**self.to_dict(), **{k: v for k, v in kw.items() if v is not None}})


_TYPES = {f.name: f.type for f in fields(AnalysisConfig)}


def _coerce(key: str, raw) -> object:
    kind = _TYPES[key]
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if kind == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw)
        if kind == "float":
            return float(raw)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{key}: cannot read {raw!r} as {kind}") from None
    return str(raw)


def from_mapping(data: dict) -> AnalysisConfig:
    unknown = sorted(set(data) - set(_TYPES))
    if unknown:
        raise InvalidInputError(f"unknown config keys: {unknown}")
    return AnalysisConfig(**{k: _coerce(k, v) for k, v in data.items()})


def parse_config(text: str) -> AnalysisConfig:
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    data = {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidInputError(f"config line {no}: expected 'key = value'")
        key = key.strip()
        if key in data:
            raise InvalidInputError(f"config line {no}: duplicate key {key!r}")
        data[key] = value.strip()
    return from_mapping(data)


def load_config(path) -> AnalysisConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


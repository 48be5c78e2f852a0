"""Synthetic Cu/Pb/Zn compartments built from the seven contamination archetypes.

Each compartment gets a correlated lognormal background (the lithogenic
main population) and then the effect of its archetype:

====  ===================  ==========================================
type  shape                effect
====  ===================  ==========================================
1     mixed                diffuse Pb+Zn enrichment and joint high outliers
2     diffuse-shift        monometallic Cu upper mixture component
3     diffuse-shift        joint Pb+Zn enrichment, no extreme outliers
4     point-outliers       multi-element outliers (all three elements)
5     point-outliers       joint outliers of all three elements
6     elevated-background  Pb baseline multiplied, individual outliers as type 7
7     point-outliers       rare single-element outliers
====  ===================  ==========================================

All values are synthetic scaffolding, not estimates for any real region.
Random streams are derived from the seed and the compartment code, so a
compartment's draws do not depend on which other compartments exist.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .data import SampleRecord
from .errors import InvalidArchetypeError, InvalidInputError

__all__ = [
    "BaseParams",
    "ContaminationArchetype",
    "archetype",
    "synthesize",
    "synthesize_compartment",
    "acceptance_assignment",
    "ELEMENTS",
]

ELEMENTS = ("Cu", "Pb", "Zn")
SHAPES = ("point-outliers", "diffuse-shift", "elevated-background", "mixed")


@dataclass(frozen=True)
class BaseParams:
    """Lognormal background shared by all compartments."""

    medians: tuple[float, float, float] = (15.0, 20.0, 40.0)
    log_sd: tuple[float, float, float] = (0.45, 0.45, 0.45)
    correlation: float = 0.5
    n_samples: int = 300
    median_jitter: float = 0.08

    def covariance(self) -> np.ndarray:
        sd = np.asarray(self.log_sd, dtype=float)
        C = np.full((3, 3), self.correlation)
        np.fill_diagonal(C, 1.0)
        return C * np.outer(sd, sd)


@dataclass(frozen=True)
class ContaminationArchetype:
    """Effect of one contamination type on a compartment.

    ``fraction`` is the share of samples carrying the main effect and
    ``magnitude`` maps element names to multiplicative factors (medians of
    lognormal factors with log-spread ``spread``).  ``outlier_fraction`` adds
    the rare single-element outliers of the near-natural background.
    """

    type_id: int
    elements: tuple[str, ...]
    shape: str
    magnitude: Mapping[str, float] = field(default_factory=dict)
    fraction: float = 0.0
    spread: float = 0.3
    outlier_fraction: float = 0.0
    outlier_factor: float = 6.0

    def __post_init__(self):
        if self.type_id not in TABLE:
            raise InvalidArchetypeError(f"unknown archetype type {self.type_id}")
        if self.shape not in SHAPES:
            raise InvalidArchetypeError(f"unknown effect shape {self.shape!r}")
        if set(self.elements) - set(ELEMENTS):
            raise InvalidArchetypeError(f"unknown elements {self.elements}")
        expected = TABLE[self.type_id]["elements"]
        if tuple(self.elements) != expected:
            raise InvalidArchetypeError(
                f"type {self.type_id} affects {expected}, got {tuple(self.elements)}"
            )
        for name in ("fraction", "outlier_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")


TABLE = {
    1: dict(elements=("Cu", "Pb", "Zn"), shape="mixed",
            magnitude={"Pb": 10.0, "Zn": 6.0, "Cu": 3.0}, fraction=0.05,
            diffuse={"Pb": 1.8, "Zn": 1.5}, diffuse_fraction=0.2),
    2: dict(elements=("Cu",), shape="diffuse-shift",
            magnitude={"Cu": 4.0}, fraction=0.3, spread=0.35),
    3: dict(elements=("Pb", "Zn"), shape="diffuse-shift",
            magnitude={"Pb": 2.5, "Zn": 1.8}, fraction=0.35, spread=0.25),
    4: dict(elements=("Cu", "Pb", "Zn"), shape="point-outliers",
            magnitude={"Cu": 8.0, "Pb": 8.0, "Zn": 8.0}, fraction=0.06, spread=0.5),
    5: dict(elements=("Cu", "Pb", "Zn"), shape="point-outliers",
            magnitude={"Cu": 10.0, "Pb": 10.0, "Zn": 10.0}, fraction=0.06, spread=0.4),
    6: dict(elements=("Pb",), shape="elevated-background",
            magnitude={"Pb": 2.0}, fraction=1.0, spread=0.0, outlier_fraction=0.03),
    7: dict(elements=("Cu", "Pb", "Zn"), shape="point-outliers",
            magnitude={}, fraction=0.0, outlier_fraction=0.03),
}

# single-element outliers: which element is hit (Pb > Zn > Cu)
OUTLIER_ELEMENT_WEIGHTS = (0.2, 0.5, 0.3)


def archetype(type_id: int, **overrides) -> ContaminationArchetype:
    """Default archetype for a contamination type, with optional overrides."""
    try:
        spec = dict(TABLE[int(type_id)])
    except (KeyError, ValueError):
        raise InvalidArchetypeError(f"unknown archetype type {type_id!r}") from None
    spec.pop("diffuse", None)
    spec.pop("diffuse_fraction", None)
    spec.update(overrides)
    return ContaminationArchetype(int(type_id), **spec)


def _streams(seed: int, code: str):
    key = zlib.crc32(code.encode("utf-8"))
    ss = np.random.SeedSequence([int(seed), key])
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def _subset(rng, n: int, fraction: float) -> np.ndarray:
    k = int(round(fraction * n))
    if k == 0:
        return np.array([], dtype=int)
    return np.sort(rng.choice(n, size=k, replace=False))


def synthesize_compartment(code: str, arch: ContaminationArchetype, base: BaseParams,
                           seed: int) -> np.ndarray:
    """``(n, 3)`` concentrations for one compartment."""
    rng_base, rng_effect, rng_outlier = _streams(seed, code)
    n = int(base.n_samples)
    if n < 1:
        raise InvalidInputError("n_samples must be positive")
    mu = np.log(np.asarray(base.medians, dtype=float))
    mu = mu + base.median_jitter * rng_base.standard_normal(3)
    logx = rng_base.multivariate_normal(mu, base.covariance(), size=n, method="cholesky")
    idx = {e: k for k, e in enumerate(ELEMENTS)}

    if arch.shape == "elevated-background":
        for e, factor in arch.magnitude.items():
            logx[:, idx[e]] += np.log(factor)
    elif arch.shape == "diffuse-shift":
        rows = _subset(rng_effect, n, arch.fraction)
        common = arch.spread * rng_effect.standard_normal(rows.size)
        for e, factor in arch.magnitude.items():
            logx[rows, idx[e]] += np.log(factor) + common
    elif arch.shape == "point-outliers" and arch.fraction > 0:
        rows = _subset(rng_effect, n, arch.fraction)
        common = arch.spread * rng_effect.standard_normal(rows.size)
        for e, factor in arch.magnitude.items():
            logx[rows, idx[e]] += np.log(factor) + common
    elif arch.shape == "mixed":
        extra = TABLE[arch.type_id]
        rows = _subset(rng_effect, n, extra.get("diffuse_fraction", 0.0))
        for e, factor in extra.get("diffuse", {}).items():
            logx[rows, idx[e]] += np.log(factor)
        rows = _subset(rng_effect, n, arch.fraction)
        common = arch.spread * rng_effect.standard_normal(rows.size)
        with_cu = rng_effect.random(rows.size) < 0.3
        for e, factor in arch.magnitude.items():
            sel = rows if e != "Cu" else rows[with_cu]
            shift = common if e != "Cu" else common[with_cu]
            logx[sel, idx[e]] += np.log(factor) + shift

    if arch.outlier_fraction > 0:
        rows = _subset(rng_outlier, n, arch.outlier_fraction)
        which = rng_outlier.choice(3, size=rows.size, p=OUTLIER_ELEMENT_WEIGHTS)
        size = np.log(arch.outlier_factor) + 0.4 * rng_outlier.standard_normal(rows.size)
        logx[rows, which] += size
    return np.exp(logx)


def synthesize(assignment: Mapping[str, ContaminationArchetype | int],
               base: BaseParams | None = None, seed: int = 0) -> list[SampleRecord]:
    """Records for every compartment in ``assignment`` (processed in code order)."""
    base = base or BaseParams()
    records = []
    for code in sorted(assignment):
        arch = assignment[code]
        if not isinstance(arch, ContaminationArchetype):
            arch = archetype(arch)
        conc = synthesize_compartment(code, arch, base, seed)
        for i, (cu, pb, zn) in enumerate(conc):
            records.append(SampleRecord(f"{code}-{i + 1:04d}", code, float(cu), float(pb), float(zn)))
    return records


def acceptance_assignment() -> dict[str, int]:
    """Twenty compartments: 4 of type 2, 4 of type 3, 2 of type 6, 10 of type 7."""
    types = [2] * 4 + [3] * 4 + [6] * 2 + [7] * 10
    return {f"D{i + 1:02d}": t for i, t in enumerate(types)}

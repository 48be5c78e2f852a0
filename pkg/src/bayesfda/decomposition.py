"""Geometric marginals and the orthogonal decomposition of 2-D/3-D densities.

Everything is computed on the clr scale.  With ``L = clr(f)`` and ``M_S``
the quadrature mean over the axes in ``S``, the clr of a geometric marginal
on the kept axes is ``M_removed L`` and the interaction parts follow the
inclusion-exclusion pattern of a functional ANOVA, e.g. for axes 1 and 2 of
a trivariate density ``M_3 L - M_23 L - M_13 L``.  Because the means use the
product quadrature weights, all parts are exactly orthogonal in the
discrete inner product.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .bayes import (
    ClrGrid,
    DensityGrid,
    clr,
    clr_inverse,
    integrate,
    lift,
    perturb,
    weighted_mean,
)
from .errors import InvalidDimsError, InvalidInputError, UndefinedCompositionError

__all__ = [
    "PART_LABELS",
    "Decomposition",
    "InformationComposition",
    "geometric_marginal",
    "arithmetic_marginal",
    "decompose",
    "recompose",
    "information_composition",
    "clr_composition",
    "COMPOSITION_FLOOR",
]

PART_LABELS = (
    "f(Cu)", "f(Pb)", "f(Zn)",
    "f(Cu,Pb)", "f(Cu,Zn)", "f(Pb,Zn)",
    "f(Cu,Pb,Zn)",
)
COMPOSITION_FLOOR = 1e-12


def _check_dims(f: DensityGrid, dims) -> tuple[int, ...]:
    dims = tuple(sorted(set(int(k) for k in dims)))
    if not dims or len(dims) >= f.ndim or dims[0] < 0 or dims[-1] >= f.ndim:
        raise InvalidDimsError(f"cannot keep axes {dims} of a {f.ndim}-D density")
    return dims


def geometric_marginal(f: DensityGrid, dims: Sequence[int]) -> DensityGrid:
    """``exp`` of the mean of ``ln f`` over the axes not in ``dims``."""
    dims = _check_dims(f, dims)
    removed = [k for k in range(f.ndim) if k not in dims]
    logm = weighted_mean(np.log(f.values), f.grid, removed).squeeze(axis=tuple(removed))
    sub = f.grid.sub(dims)
    return clr_inverse(ClrGrid(sub, logm - integrate(logm, sub) / sub.volume))


def arithmetic_marginal(f: DensityGrid, dims: Sequence[int]) -> DensityGrid:
    """Ordinary marginal: quadrature integral over the axes not in ``dims``."""
    dims = _check_dims(f, dims)
    removed = [k for k in range(f.ndim) if k not in dims]
    vals = f.values
    for k in sorted(removed, reverse=True):
        w = f.grid.axis_weights[k]
        shape = [1] * vals.ndim
        shape[k] = -1
        vals = np.sum(vals * w.reshape(shape), axis=k)
    return DensityGrid(f.grid.sub(dims), vals).normalized()


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Marginal and interaction parts of a bi- or trivariate density.

    ``marginals`` holds the univariate geometric marginals, ``interactions``
    maps axis tuples to their interaction densities (the pairwise ones on
    the 2-D sub-grids, the full one on the original grid).  ``clr_parts``
    holds every part lifted to the full grid on the clr scale, keyed the
    same way with univariate keys ``(k,)``.
    """

    density: DensityGrid
    marginals: tuple[DensityGrid, ...]
    interactions: dict
    clr_parts: dict

    @property
    def ndim(self) -> int:
        return self.density.ndim

    @property
    def keys(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.clr_parts)

    @property
    def independence(self) -> DensityGrid:
        grid = self.density.grid
        total = sum(self.clr_parts[(k,)].values for k in range(self.ndim))
        return clr_inverse(ClrGrid(grid, total))

    def part(self, key) -> DensityGrid:
        """A part as a density on its own (lower-dimensional) grid."""
        key = tuple(key)
        if len(key) == 1:
            return self.marginals[key[0]]
        return self.interactions[key]

    def lifted(self, key) -> DensityGrid:
        return clr_inverse(self.clr_parts[tuple(key)])

    def squared_norms(self) -> dict:
        """Squared Bayes norms of the parts, measured on the full grid."""
        w = self.density.grid.weights
        return {k: float(np.sum(w * z.values ** 2)) for k, z in self.clr_parts.items()}


def _anova_clr(L: np.ndarray, grid) -> dict:
    """Clr-scale ANOVA terms of ``L`` lifted to the full grid."""
    d = L.ndim
    axes = range(d)
    means = {}
    for r in range(d + 1):
        for keep in combinations(axes, r):
            removed = tuple(k for k in axes if k not in keep)
            means[keep] = np.broadcast_to(weighted_mean(L, grid, removed), L.shape)
    terms = {}
    for r in range(1, d + 1):
        for key in combinations(axes, r):
            acc = np.zeros(L.shape)
            for s in range(r + 1):
                for sub in combinations(key, s):
                    acc = acc + (-1) ** (r - s) * means[sub]
            terms[key] = acc
    return terms


def decompose(f: DensityGrid) -> Decomposition:
    """Split ``f`` into geometric marginals and interaction parts.

    The parts satisfy ``f = (+)`` of all lifted parts and are mutually
    orthogonal.  Supports 2-D and 3-D densities.
    """
    if f.ndim not in (2, 3):
        raise InvalidDimsError(f"decomposition needs a 2-D or 3-D density, got {f.ndim}-D")
    grid = f.grid
    terms = _anova_clr(clr(f).values, grid)
    clr_parts = {key: ClrGrid(grid, val) for key, val in terms.items()}
    marginals = tuple(geometric_marginal(f, (k,)) for k in range(f.ndim))
    interactions = {}
    for key, z in clr_parts.items():
        if len(key) == 1:
            continue
        if len(key) == f.ndim:
            interactions[key] = clr_inverse(z)
        else:
            idx = tuple(slice(None) if k in key else 0 for k in range(f.ndim))
            sub = grid.sub(key)
            interactions[key] = clr_inverse(ClrGrid(sub, z.values[idx]))
    return Decomposition(f, marginals, interactions, clr_parts)


def recompose(d: Decomposition) -> DensityGrid:
    """Perturb all lifted parts back together."""
    grid = d.density.grid
    out = None
    for k in range(d.ndim):
        g = lift(d.marginals[k], grid, (k,))
        out = g if out is None else perturb(out, g)
    for key, part in d.interactions.items():
        g = part if len(key) == d.ndim else lift(part, grid, key)
        out = perturb(out, g)
    return out


@dataclass(frozen=True)
class InformationComposition:
    """Relative squared norms of the decomposition parts."""

    parts: tuple[float, ...]
    labels: tuple[str, ...] = PART_LABELS
    total: float = float("nan")

    def __post_init__(self):
        parts = tuple(float(p) for p in self.parts)
        if len(parts) != len(self.labels):
            raise InvalidInputError(f"{len(parts)} parts for {len(self.labels)} labels")
        if any(not np.isfinite(p) or p < 0 for p in parts):
            raise InvalidInputError("composition parts must be finite and non-negative")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "labels", tuple(self.labels))

    def as_array(self) -> np.ndarray:
        return np.array(self.parts)

    def __getitem__(self, label: str) -> float:
        return self.parts[self.labels.index(label)]


def _labels_for(d: int, elements: Sequence[str]) -> tuple[str, ...]:
    out = []
    for r in range(1, d + 1):
        for key in combinations(range(d), r):
            out.append("f(" + ",".join(elements[k] for k in key) + ")")
    return tuple(out)


def information_composition(d: Decomposition, f: DensityGrid | None = None,
                            elements: Sequence[str] = ("Cu", "Pb", "Zn")) -> InformationComposition:
    """Squared part norms divided by the squared norm of ``f``.

    Raises
    ------
    UndefinedCompositionError
        If ``f`` has zero norm (is uniform).
    """
    if f is not None and f is not d.density:
        if f.grid != d.density.grid or not np.allclose(
            clr(f).values, clr(d.density).values, rtol=0, atol=1e-9
        ):
            raise InvalidInputError("decomposition was not produced from this density")
    dens = d.density
    z = clr(dens).values
    total = float(np.sum(dens.grid.weights * z * z))
    scale = max(float(np.max(np.abs(z))), 1.0)
    if total <= (1e-10 * scale) ** 2 * dens.grid.volume:
        raise UndefinedCompositionError("density has zero norm; composition undefined")
    sq = d.squared_norms()
    order = sorted(sq, key=lambda k: (len(k), k))
    parts = [sq[k] / total for k in order]
    return InformationComposition(tuple(parts), _labels_for(d.ndim, elements), total)


def clr_composition(ic, floor: float = COMPOSITION_FLOOR) -> np.ndarray:
    """Clr transform of a composition after flooring parts at ``floor``."""
    parts = ic.as_array() if isinstance(ic, InformationComposition) else np.asarray(ic, float)
    logs = np.log(np.maximum(parts, floor))
    return logs - logs.mean()

"""Grid representation of Bayes-space densities and their clr geometry.

A density is stored by its values at the nodes of a regular tensor grid
over a box in up to three dimensions.  All integrals use the tensor-product
trapezoidal rule, so the discrete clr transform is exactly zero-integral
and the discrete inner product is an exact isometry between the two forms
(log-ratio double integral and clr single integral).

Densities are equivalence classes up to a positive factor; every operation
that builds a new density returns the unit-integral representative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    IncompatibleGridsError,
    InvalidInputError,
    RangeError,
)

__all__ = [
    "Box",
    "Grid",
    "DensityGrid",
    "ClrGrid",
    "integrate",
    "weighted_mean",
    "clr",
    "clr_inverse",
    "perturb",
    "power",
    "subtract",
    "inner_product",
    "norm",
    "distance",
    "uniform",
    "lift",
    "tau_int",
]

MIN_NODES = 4
MAX_DIM = 3


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``(a_1, b_1) x ... x (a_d, b_d)``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(a) for a in self.lower)
        upper = tuple(float(b) for b in self.upper)
        if len(lower) != len(upper) or not 1 <= len(lower) <= MAX_DIM:
            raise InvalidInputError(
                f"box needs 1 to {MAX_DIM} matching bounds, got {len(lower)} and {len(upper)}"
            )
        for k, (a, b) in enumerate(zip(lower, upper)):
            if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
                raise InvalidInputError(f"invalid interval ({a}, {b}) on axis {k}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def ndim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def sub(self, dims: Sequence[int]) -> "Box":
        return Box(tuple(self.lower[k] for k in dims), tuple(self.upper[k] for k in dims))

    def contains(self, points) -> np.ndarray:
        """Boolean mask of rows of ``points`` lying strictly inside the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts > lo) & (pts < hi), axis=1)


@dataclass(frozen=True)
class Grid:
    """Equally spaced nodes, endpoints included, on every axis of a box."""

    box: Box
    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(m) for m in self.shape)
        if len(shape) != self.box.ndim:
            raise InvalidInputError(
                f"grid shape {shape} does not match box dimension {self.box.ndim}"
            )
        if any(m < MIN_NODES for m in shape):
            raise InvalidInputError(f"every axis needs at least {MIN_NODES} nodes, got {shape}")
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_bounds(cls, lower, upper, shape) -> "Grid":
        if np.isscalar(lower):
            lower, upper = (lower,), (upper,)
        if np.isscalar(shape):
            shape = (shape,) * len(lower)
        return cls(Box(tuple(lower), tuple(upper)), tuple(shape))

    @property
    def ndim(self) -> int:
        return self.box.ndim

    @property
    def volume(self) -> float:
        return self.box.volume

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(w / (m - 1) for w, m in zip(self.box.widths, self.shape))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        out = []
        for a, b, m in zip(self.box.lower, self.box.upper, self.shape):
            x = np.linspace(a, b, m)
            x.setflags(write=False)
            out.append(x)
        return tuple(out)

    @cached_property
    def axis_weights(self) -> tuple[np.ndarray, ...]:
        """One-dimensional trapezoid weights; each sums to the axis width."""
        out = []
        for h, m in zip(self.spacing, self.shape):
            w = np.full(m, h)
            w[0] = w[-1] = h / 2
            w.setflags(write=False)
            out.append(w)
        return tuple(out)

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.axis_weights[0]
        for wk in self.axis_weights[1:]:
            w = np.multiply.outer(w, wk)
        w = np.array(w)
        w.setflags(write=False)
        return w

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates as a ``(size, ndim)`` array, last axis fastest."""
        return np.column_stack([m.ravel() for m in self.mesh()])

    def sub(self, dims: Sequence[int]) -> "Grid":
        dims = tuple(dims)
        return Grid(self.box.sub(dims), tuple(self.shape[k] for k in dims))

    def nearest_index(self, point) -> tuple[int, ...]:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return tuple(int(np.argmin(np.abs(ax - p))) for ax, p in zip(self.axes, point))


def _frozen(values, grid: Grid) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != grid.shape:
        if arr.size == grid.size:
            arr = arr.reshape(grid.shape)
        else:
            raise InvalidInputError(f"values of shape {arr.shape} do not fit grid {grid.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Strictly positive node values representing a density up to scale."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen(self.values, self.grid)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("density values must be finite")
        if np.any(arr <= 0):
            idx = np.unravel_index(int(np.argmin(arr)), arr.shape)
            raise DomainError(
                f"density values must be strictly positive; found {arr[idx]!r} at node {idx}"
            )
        object.__setattr__(self, "values", arr)

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    def normalized(self) -> "DensityGrid":
        """Unit-integral representative of the equivalence class."""
        return DensityGrid(self.grid, self.values / integrate(self.values, self.grid))

    def log(self) -> np.ndarray:
        return np.log(self.values)


@dataclass(frozen=True, eq=False)
class ClrGrid:
    """Real node values of a clr-transformed density (zero integral)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen(self.values, self.grid)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("clr values must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def ndim(self) -> int:
        return self.grid.ndim


def _values_and_grid(f, grid):
    if isinstance(f, (DensityGrid, ClrGrid)):
        if grid is not None and grid != f.grid:
            raise IncompatibleGridsError("explicit grid differs from the function's grid")
        return f.values, f.grid
    if grid is None:
        raise InvalidInputError("raw node values need an explicit grid")
    return _frozen(f, grid), grid


def integrate(f, grid: Grid | None = None) -> float:
    """Trapezoidal integral of node values over the grid box.

    Parameters
    ----------
    f : DensityGrid, ClrGrid or array_like
        Function values at the grid nodes.  Plain arrays need ``grid``.
    grid : Grid, optional

    Returns
    -------
    float
    """
    values, grid = _values_and_grid(f, grid)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("cannot integrate non-finite node values")
    return float(np.sum(grid.weights * values))


def weighted_mean(values: np.ndarray, grid: Grid, axes: Sequence[int]) -> np.ndarray:
    """Quadrature mean of ``values`` over ``axes``, keeping those axes as size 1."""
    out = np.asarray(values, dtype=float)
    for k in axes:
        w = grid.axis_weights[k] / grid.box.widths[k]
        shape = [1] * out.ndim
        shape[k] = -1
        out = np.sum(out * w.reshape(shape), axis=k, keepdims=True)
    return out


def tau_int(values: np.ndarray, grid: Grid) -> float:
    """Tolerance for a vanishing integral of ``values``."""
    return 1e-8 * grid.volume * max(float(np.max(np.abs(values))), 1.0)


def _same_grid(*fs):
    g = fs[0].grid
    for f in fs[1:]:
        if f.grid != g:
            raise IncompatibleGridsError(f"grids differ: {g} vs {f.grid}")
    return g


def _centre(logv: np.ndarray, grid: Grid) -> np.ndarray:
    return logv - integrate(logv, grid) / grid.volume


def clr(f: DensityGrid) -> ClrGrid:
    """Centred log-ratio transform ``ln f - mean(ln f)``."""
    return ClrGrid(f.grid, _centre(np.log(f.values), f.grid))


def clr_inverse(z: ClrGrid) -> DensityGrid:
    """Unit-integral density whose clr is ``z``.

    Raises
    ------
    RangeError
        If ``exp`` of the node values cannot be represented, i.e. the
        spread of ``z`` exceeds the floating-point exponent range.
    """
    values = np.asarray(z.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("clr values must be finite")
    imax = np.unravel_index(int(np.argmax(values)), values.shape)
    with np.errstate(over="ignore", under="ignore"):
        e = np.exp(values - values[imax])
    if np.any(e <= 0):
        imin = np.unravel_index(int(np.argmin(values)), values.shape)
        raise RangeError(
            f"exp(clr) underflows: max {values[imax]!r} at node {imax}, "
            f"min {values[imin]!r} at node {imin}"
        )
    return DensityGrid(z.grid, e).normalized()


def _from_log(logv: np.ndarray, grid: Grid) -> DensityGrid:
    return clr_inverse(ClrGrid(grid, _centre(logv, grid)))


def perturb(f: DensityGrid, g: DensityGrid) -> DensityGrid:
    """``f (+) g``: pointwise product."""
    grid = _same_grid(f, g)
    return _from_log(np.log(f.values) + np.log(g.values), grid)


def power(alpha: float, f: DensityGrid) -> DensityGrid:
    """``alpha (.) f``: pointwise power."""
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise InvalidInputError("power exponent must be finite")
    return _from_log(alpha * np.log(f.values), f.grid)


def subtract(f: DensityGrid, g: DensityGrid) -> DensityGrid:
    """``f (-) g``: pointwise ratio."""
    grid = _same_grid(f, g)
    return _from_log(np.log(f.values) - np.log(g.values), grid)


def inner_product(f: DensityGrid, g: DensityGrid) -> float:
    """Bayes inner product, computed as the integral of ``clr(f) * clr(g)``."""
    grid = _same_grid(f, g)
    return integrate(clr(f).values * clr(g).values, grid)


def norm(f: DensityGrid) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def distance(f: DensityGrid, g: DensityGrid) -> float:
    """Bayes distance ``||f (-) g||``."""
    grid = _same_grid(f, g)
    diff = _centre(np.log(f.values) - np.log(g.values), grid)
    return float(np.sqrt(max(integrate(diff * diff, grid), 0.0)))


def uniform(grid: Grid) -> DensityGrid:
    return DensityGrid(grid, np.full(grid.shape, 1.0 / grid.volume))


def lift(f, grid: Grid, dims: Sequence[int]):
    """Cylindrical extension of a lower-dimensional grid function.

    ``f`` lives on ``grid.sub(dims)``; the result is constant along the
    axes of ``grid`` not listed in ``dims``.  Works for both density and
    clr grids and returns the same kind.
    """
    dims = tuple(dims)
    if f.grid != grid.sub(dims):
        raise IncompatibleGridsError(f"function grid does not match axes {dims} of target grid")
    if list(dims) != sorted(dims):
        raise InvalidInputError("lifted axes must be given in increasing order")
    shape = [1] * grid.ndim
    for k in dims:
        shape[k] = grid.shape[k]
    values = np.broadcast_to(f.values.reshape(shape), grid.shape)
    if isinstance(f, ClrGrid):
        return ClrGrid(grid, values)
    return DensityGrid(grid, values).normalized()

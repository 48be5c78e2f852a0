"""Clamped B-spline bases and zero-integral least-squares fits of clr densities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .bayes import ClrGrid, Grid
from .errors import InvalidBasisError, InvalidInputError, UnderdeterminedFitError

__all__ = [
    "BsplineBasis",
    "SplineCoefficients",
    "build_basis",
    "fit_clr_spline",
    "anomaly_to_grid",
    "DEFAULT_K",
    "DEFAULT_ORDER",
]

DEFAULT_K = 13
DEFAULT_ORDER = 4


@dataclass(frozen=True, eq=False)
class BsplineBasis:
    """A clamped uniform B-spline basis evaluated on a 1-D grid.

    ``matrix`` has one row per grid node and one column per basis function.
    """

    order: int
    knots: np.ndarray = field(repr=False)
    grid: Grid
    matrix: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[1]

    @property
    def degree(self) -> int:
        return self.order - 1

    def evaluate(self, x) -> np.ndarray:
        """Basis values at arbitrary points inside the box."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a, b = self.knots[0], self.knots[-1]
        if np.any((x < a) | (x > b)):
            raise InvalidInputError("evaluation points outside the basis interval")
        return BSpline.design_matrix(x, self.knots, self.degree).toarray()

    def metadata(self) -> dict:
        box = self.grid.box
        return {
            "box": [box.lower[0], box.upper[0]],
            "K": self.size,
            "order": self.order,
            "knots": [float(t) for t in self.knots],
            "nodes": self.grid.shape[0],
        }


def build_basis(box, K: int = DEFAULT_K, order: int = DEFAULT_ORDER,
                nodes: int | Grid = 128) -> BsplineBasis:
    """Clamped basis with ``K`` functions and uniform interior knots.

    Parameters
    ----------
    box : Box or Grid
        One-dimensional support.  A ``Grid`` also fixes the evaluation nodes.
    K : int
        Number of basis functions, at least ``order``.
    order : int
        Polynomial degree plus one (4 = cubic).
    nodes : int or Grid
        Evaluation nodes when ``box`` is a plain ``Box``.
    """
    if isinstance(box, Grid):
        grid = box
    elif isinstance(nodes, Grid):
        grid = nodes
    else:
        grid = Grid(box, (int(nodes),))
    if grid.ndim != 1:
        raise InvalidBasisError("B-spline bases are one-dimensional")
    K, order = int(K), int(order)
    if order < 1:
        raise InvalidBasisError(f"order must be positive, got {order}")
    if K < order:
        raise InvalidBasisError(f"basis size {K} is smaller than the order {order}")
    a, b = grid.box.lower[0], grid.box.upper[0]
    interior = np.linspace(a, b, K - order + 2)[1:-1]
    knots = np.concatenate([np.full(order, a), interior, np.full(order, b)])
    knots.setflags(write=False)
    matrix = BSpline.design_matrix(grid.axes[0], knots, order - 1).toarray()
    matrix.setflags(write=False)
    return BsplineBasis(order, knots, grid, matrix)


@dataclass(frozen=True, eq=False)
class SplineCoefficients:
    coefficients: np.ndarray
    label: str = ""
    rss: float = float("nan")

    @property
    def total(self) -> float:
        return float(np.sum(self.coefficients))


def _kkt(basis: BsplineBasis):
    B = basis.matrix
    if np.linalg.matrix_rank(B) < B.shape[1]:
        raise UnderdeterminedFitError(
            f"design matrix of rank {np.linalg.matrix_rank(B)} for {B.shape[1]} coefficients"
        )
    a = B.T @ basis.grid.weights
    K = B.shape[1]
    A = np.zeros((K + 1, K + 1))
    A[:K, :K] = B.T @ B
    A[:K, K] = a
    A[K, :K] = a
    return A


def fit_clr_spline(z, basis: BsplineBasis, label: str = "") -> SplineCoefficients:
    """Least-squares spline fit to clr values with a zero-integral constraint.

    The constraint is that the trapezoidal integral of the fitted spline at
    the basis grid nodes vanishes; it is imposed with a Lagrange multiplier.
    """
    values = z.values if isinstance(z, ClrGrid) else np.asarray(z, dtype=float)
    if isinstance(z, ClrGrid) and z.grid != basis.grid:
        raise InvalidInputError("clr grid and basis grid differ")
    if values.shape != (basis.grid.shape[0],):
        raise InvalidInputError(f"expected {basis.grid.shape[0]} node values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("clr values must be finite")
    A = _kkt(basis)
    K = basis.size
    rhs = np.zeros(K + 1)
    rhs[:K] = basis.matrix.T @ values
    sol = np.linalg.solve(A, rhs)
    coef = sol[:K]
    resid = values - basis.matrix @ coef
    return SplineCoefficients(coef, label, float(resid @ resid))


def anomaly_to_grid(levels, basis: BsplineBasis) -> np.ndarray:
    """Weight coefficient anomaly levels by the basis values at each node.

    The basis is a partition of unity, so each node value is a convex
    combination of the levels; the result is clipped to [-1, 1] to remove
    rounding excursions.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.shape[-1] != basis.size:
        raise InvalidInputError(f"{levels.shape[-1]} levels for {basis.size} basis functions")
    return np.clip(levels @ basis.matrix.T, -1.0, 1.0)

"""Complete-linkage clustering of compartments and dendrogram utilities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bayes import DensityGrid, distance
from .errors import IncompatibleGridsError, InvalidInputError

__all__ = [
    "DistanceMatrix",
    "Merge",
    "Dendrogram",
    "bayes_distance_matrix",
    "euclidean_distance_matrix",
    "complete_linkage",
    "cut",
    "leaf_order",
    "auto_k",
]


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        D = np.array(self.values, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
            raise InvalidInputError(f"distance matrix must be square, got {D.shape}")
        if np.isnan(D).any():
            raise InvalidInputError("distance matrix contains NaN")
        if np.any(D < 0) or not np.allclose(D, D.T, rtol=1e-12, atol=1e-12):
            raise InvalidInputError("distances must be symmetric and non-negative")
        if np.any(np.diag(D) != 0):
            raise InvalidInputError("distance matrix diagonal must be zero")
        D = 0.5 * (D + D.T)
        D.setflags(write=False)
        labels = tuple(self.labels) or tuple(str(i) for i in range(D.shape[0]))
        if len(labels) != D.shape[0]:
            raise InvalidInputError("label count does not match the matrix size")
        object.__setattr__(self, "values", D)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def bayes_distance_matrix(densities: Sequence[DensityGrid], labels=()) -> DistanceMatrix:
    """Pairwise Bayes distances between densities on one grid."""
    if not densities:
        raise InvalidInputError("no densities given")
    grid = densities[0].grid
    for f in densities[1:]:
        if f.grid != grid:
            raise IncompatibleGridsError("densities live on different grids")
    n = len(densities)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = distance(densities[i], densities[j])
    return DistanceMatrix(D, tuple(labels))


def euclidean_distance_matrix(rows, labels=()) -> DistanceMatrix:
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError("expected a 2-D array of row vectors")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("row vectors must be finite")
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(D, 0.0)
    return DistanceMatrix(D, tuple(labels))


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    id: int
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge history; leaves are ``0..n-1``, merge ``k`` creates id ``n + k``."""

    merges: tuple[Merge, ...]
    labels: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def linkage_matrix(self) -> np.ndarray:
        """Merges in the ``scipy.cluster.hierarchy`` linkage layout."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "merges": [
                {"left": m.left, "right": m.right, "height": m.height, "id": m.id, "size": m.size}
                for m in self.merges
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Dendrogram":
        merges = tuple(Merge(int(m["left"]), int(m["right"]), float(m["height"]),
                             int(m["id"]), int(m["size"])) for m in data["merges"])
        return cls(merges, tuple(data["labels"]))


def complete_linkage(D: DistanceMatrix) -> Dendrogram:
    """Agglomerative clustering with the maximum inter-member distance.

    At each step the closest pair of active clusters is merged; exact ties
    go to the lexicographically smallest ``(left id, right id)`` pair.
    """
    if not isinstance(D, DistanceMatrix):
        D = DistanceMatrix(D)
    n = D.n
    if n < 2:
        raise InvalidInputError("clustering needs at least two items")
    size = 2 * n - 1
    dist = np.full((size, size), np.inf)
    dist[:n, :n] = D.values
    active = list(range(n))
    counts = {i: 1 for i in range(n)}
    merges = []
    for step in range(n - 1):
        best = None
        for a_pos, a in enumerate(active):
            for b in active[a_pos + 1:]:
                d = dist[a, b]
                key = (d, a, b)
                if best is None or key < best:
                    best = key
        d, a, b = best
        new = n + step
        active.remove(a)
        active.remove(b)
        for c in active:
            dist[new, c] = dist[c, new] = max(dist[a, c], dist[b, c])
        counts[new] = counts[a] + counts[b]
        merges.append(Merge(a, b, float(d), new, counts[new]))
        active.append(new)
    return Dendrogram(tuple(merges), D.labels)


def _children(dend: Dendrogram) -> dict:
    return {m.id: (m.left, m.right) for m in dend.merges}


def leaf_order(dend: Dendrogram) -> list[int]:
    """Left-to-right leaf sequence of the merge tree."""
    n = dend.n
    if n == 1 or not dend.merges:
        return list(range(n))
    kids = _children(dend)
    order = []
    stack = [dend.merges[-1].id]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            left, right = kids[node]
            stack.append(right)
            stack.append(left)
    return order


def cut(dend: Dendrogram, k: int) -> np.ndarray:
    """Cluster labels after undoing the ``k - 1`` highest merges.

    Labels are numbered ``0..k-1`` in order of first appearance along
    :func:`leaf_order`.
    """
    n = dend.n
    k = int(k)
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must lie in [1, {n}], got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in dend.merges[: n - k]:
        parent[find(m.left)] = m.id
        parent[find(m.right)] = m.id
    roots = [find(i) for i in range(n)]
    labels = np.empty(n, dtype=int)
    names: dict[int, int] = {}
    for leaf in leaf_order(dend):
        r = roots[leaf]
        if r not in names:
            names[r] = len(names)
        labels[leaf] = names[r]
    return labels


def auto_k(dend: Dendrogram) -> int:
    """Cluster count at the largest relative gap between merge heights.

    The gap between consecutive heights ``h_i <= h_{i+1}`` is measured as
    ``(h_{i+1} - h_i) / h_{i+1}``; cutting inside it leaves ``n - i``
    clusters (1-based ``i``).  Ties favour fewer clusters.  Returns 1 for
    fewer than three items or when all heights coincide.
    """
    h = dend.heights
    n = dend.n
    if n < 3:
        return 1
    best_gap, best_k = 0.0, 1
    for i in range(len(h) - 1, 0, -1):
        hi, lo = h[i], h[i - 1]
        if hi <= 0:
            continue
        gap = (hi - lo) / hi
        if gap > best_gap + 1e-12:
            best_gap, best_k = gap, n - i
    return best_k

"""Deviating Data Cells: cellwise outlier detection and its two extensions.

``ddc`` runs the four steps of the detector on a plain data matrix,
``functional_ddc`` applies it to B-spline coefficients of clr densities and
maps the anomaly levels back to a grid, and ``lr_ddc`` applies it to all
pairwise logratios of compositions and aggregates flags per part.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateDataError, InvalidInputError

__all__ = [
    "DataMatrix",
    "CellFlagMatrix",
    "FunctionalDDCResult",
    "LogratioDDCResult",
    "MAD_CONSISTENCY",
    "mad",
    "robust_scale",
    "robust_standardize",
    "cutoff",
    "robust_correlation",
    "ddc",
    "functional_ddc",
    "pairwise_logratios",
    "lr_ddc",
]

MAD_CONSISTENCY = 1.4826
CORR_THRESHOLD = 0.5
# a cell is predicted only if its available peers carry this share of the peer weight
MIN_PEER_WEIGHT = 0.5
DEFAULT_P_CUT = 0.99
DEFAULT_AGG_FRACTION = 0.30
RESIDUAL_SCALE_FLOOR = 1e-8
PERMUTATION_DRAWS = 4000
PERMUTATION_SEED = 20240601


def mad(x) -> float:
    """Raw median absolute deviation from the median, NaNs ignored."""
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return float("nan")
    return float(np.median(np.abs(x - np.median(x))))


def robust_scale(x) -> float:
    return MAD_CONSISTENCY * mad(x)


@dataclass(frozen=True, eq=False)
class DataMatrix:
    values: np.ndarray
    labels: tuple[str, ...] = ()
    row_labels: tuple[str, ...] = ()

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise InvalidInputError("data matrix must be 2-D")
        n, p = arr.shape
        if n < 3 or p < 1:
            raise InvalidInputError(f"data matrix needs at least 3 rows and 1 column, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("data matrix entries must be finite")
        labels = tuple(self.labels) or tuple(f"V{j + 1}" for j in range(p))
        rows = tuple(self.row_labels) or tuple(str(i) for i in range(n))
        if len(labels) != p or len(rows) != n:
            raise InvalidInputError("label counts do not match the matrix shape")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_labels", rows)

    @property
    def shape(self):
        return self.values.shape


def _as_matrix(X) -> DataMatrix:
    return X if isinstance(X, DataMatrix) else DataMatrix(X)


def robust_standardize(X) -> DataMatrix:
    """Subtract column medians and divide by ``1.4826 * MAD``.

    Raises
    ------
    DegenerateDataError
        Naming every column with zero MAD.
    """
    X = _as_matrix(X)
    med = np.median(X.values, axis=0)
    scale = MAD_CONSISTENCY * np.median(np.abs(X.values - med), axis=0)
    bad = [X.labels[j] for j in np.flatnonzero(~(scale > 0))]
    if bad:
        raise DegenerateDataError(f"zero MAD in column(s) {', '.join(bad)}", columns=bad)
    return DataMatrix((X.values - med) / scale, X.labels, X.row_labels)


def cutoff(p_cut: float) -> float:
    """``sqrt`` of the ``p_cut`` quantile of chi-squared with one degree of freedom."""
    p_cut = float(p_cut)
    if not 0 < p_cut < 1:
        raise InvalidInputError(f"p_cut must lie in (0, 1), got {p_cut}")
    return float(np.sqrt(stats.chi2.ppf(p_cut, df=1)))


def robust_correlation(a, b) -> float:
    """Correlation from robust scales of the sum and difference of two columns."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError("columns differ in length")
    ok = np.isfinite(a) & np.isfinite(b)
    s = robust_scale(a[ok] + b[ok]) ** 2
    d = robust_scale(a[ok] - b[ok]) ** 2
    if not s + d > 0:
        raise DegenerateDataError("both columns have zero robust spread")
    return float(np.clip((s - d) / (s + d), -1.0, 1.0))


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    return float(v[np.searchsorted(cum, 0.5 * cum[-1])])


@dataclass(frozen=True, eq=False)
class CellFlagMatrix:
    """Per-cell anomaly levels and flags produced by :func:`ddc`.

    ``levels`` are ``clip(r / (2 * cutoff), -1, 1)`` of the standardised
    residuals ``r``; a cell is flagged when ``|r| > cutoff``, i.e. when its
    level exceeds 0.5 in absolute value.
    """

    levels: np.ndarray
    cell_flags: np.ndarray
    row_flags: np.ndarray
    p_cut: float
    cutoff: float
    residuals: np.ndarray = field(repr=False)
    predicted: np.ndarray = field(repr=False)
    row_stats: np.ndarray = field(repr=False)
    row_threshold: float
    labels: tuple[str, ...]
    row_labels: tuple[str, ...]
    degenerate_columns: tuple[str, ...] = ()
    correlation_threshold: float = CORR_THRESHOLD

    @property
    def shape(self):
        return self.levels.shape

    @property
    def flag_threshold(self) -> float:
        return 0.5

    def metadata(self) -> dict:
        return {
            "p_cut": self.p_cut,
            "cutoff": self.cutoff,
            "correlation_threshold": self.correlation_threshold,
            "row_threshold": self.row_threshold,
            "level_flag_threshold": self.flag_threshold,
            "degenerate_columns": list(self.degenerate_columns),
            "columns": list(self.labels),
        }


def _row_threshold(capped: np.ndarray, flags: np.ndarray, p_cut: float) -> float:
    """``p_cut`` quantile of the row statistic under column-wise resampling.

    Rows of the reference sample combine independent draws from each
    column's unflagged capped squared residuals, so deviating cells do not
    inflate their own reference distribution.  Pools are sorted before the
    seeded draws, which makes the threshold independent of row order.
    """
    n, p = capped.shape
    cap = float(np.max(capped)) if capped.size else 0.0
    rng = np.random.default_rng(PERMUTATION_SEED)
    draws = max(PERMUTATION_DRAWS, n)
    total = np.zeros(draws)
    for j in range(p):
        pool = np.sort(capped[~flags[:, j], j])
        if pool.size == 0:
            pool = np.array([cap])
        total += pool[rng.integers(0, pool.size, size=draws)]
    return float(np.quantile(total / p, p_cut))


def ddc(X, p_cut: float = DEFAULT_P_CUT, corr_threshold: float = CORR_THRESHOLD,
        allow_degenerate: bool = False) -> CellFlagMatrix:
    """Detect deviating cells and rows of a data matrix.

    Steps: robust standardisation; univariate flagging at ``cutoff(p_cut)``
    (flagged cells are withheld from the later estimates); prediction of
    each cell from the columns with absolute robust correlation above
    ``corr_threshold`` (weighted median of slope-adjusted values, then
    deshrunk; no prediction when the peers available in that row carry less
    than ``MIN_PEER_WEIGHT`` of the total peer weight); residual flagging; a row test on the capped squared
    residuals.

    Columns with zero MAD are not standardised: their cells that equal the
    column median get level 0, every other cell is flagged at level +-1.
    If all columns are degenerate a :class:`DegenerateDataError` is raised
    unless ``allow_degenerate`` is set, in which case nothing is flagged
    beyond the deviating cells of those columns.
    """
    X = _as_matrix(X)
    c = cutoff(p_cut)
    x = X.values
    n, p = x.shape
    med = np.median(x, axis=0)
    scale = MAD_CONSISTENCY * np.median(np.abs(x - med), axis=0)
    degenerate = ~(scale > 0)
    deg_labels = [X.labels[j] for j in np.flatnonzero(degenerate)]
    if degenerate.all() and not allow_degenerate:
        raise DegenerateDataError(
            f"every column has zero MAD: {', '.join(deg_labels)}", columns=deg_labels
        )

    good = np.flatnonzero(~degenerate)
    z = np.zeros_like(x)
    z[:, good] = (x[:, good] - med[good]) / scale[good]
    clean = np.where(np.abs(z) > c, np.nan, z)
    clean[:, degenerate] = np.nan

    corr = np.zeros((p, p))
    for j, h in combinations(good, 2):
        ok = np.isfinite(clean[:, j]) & np.isfinite(clean[:, h])
        if ok.sum() < 3:
            continue
        try:
            corr[j, h] = corr[h, j] = robust_correlation(clean[ok, j], clean[ok, h])
        except DegenerateDataError:
            pass
    col_scale = np.array([robust_scale(clean[:, j]) if j in good else 0.0 for j in range(p)])

    predicted = np.zeros_like(z)
    has_pred = np.zeros((n, p), dtype=bool)
    for j in good:
        peers = [h for h in good if h != j and abs(corr[j, h]) > corr_threshold
                 and col_scale[h] > 0]
        if not peers:
            continue
        peers = np.array(peers)
        slopes = corr[j, peers] * col_scale[j] / col_scale[peers]
        weights = np.abs(corr[j, peers])
        for i in range(n):
            avail = np.isfinite(clean[i, peers])
            if avail.any() and weights[avail].sum() >= MIN_PEER_WEIGHT * weights.sum():
                predicted[i, j] = _weighted_median(
                    slopes[avail] * clean[i, peers[avail]], weights[avail]
                )
                has_pred[i, j] = True
        rows = has_pred[:, j] & np.isfinite(clean[:, j])
        if rows.sum() >= 3 and np.ptp(predicted[rows, j]) > 0:
            # deshrink: repeated-median line of observed on predicted
            fit = stats.siegelslopes(clean[rows, j], predicted[rows, j])
            if np.isfinite(fit.slope) and fit.slope > 0:
                predicted[has_pred[:, j], j] = (
                    fit.slope * predicted[has_pred[:, j], j] + fit.intercept
                )

    residuals = z.copy()
    for j in good:
        col = has_pred[:, j]
        if not col.any():
            continue
        res = z[col, j] - predicted[col, j]
        s = robust_scale(res)
        s = max(s, RESIDUAL_SCALE_FLOOR) if np.isfinite(s) else 1.0
        residuals[col, j] = res / s
    for j in np.flatnonzero(degenerate):
        diff = x[:, j] - med[j]
        residuals[:, j] = np.where(diff == 0, 0.0, np.copysign(np.inf, diff))

    cell_flags = np.abs(residuals) > c
    levels = np.clip(residuals / (2 * c), -1.0, 1.0)
    capped = np.minimum(residuals ** 2, c * c)
    row_stats = capped.mean(axis=1)
    threshold = _row_threshold(capped, cell_flags, p_cut)
    row_flags = row_stats > threshold + 1e-12

    levels.setflags(write=False)
    return CellFlagMatrix(
        levels=levels, cell_flags=cell_flags, row_flags=row_flags, p_cut=float(p_cut),
        cutoff=c, residuals=residuals, predicted=predicted, row_stats=row_stats,
        row_threshold=threshold, labels=X.labels, row_labels=X.row_labels,
        degenerate_columns=tuple(deg_labels), correlation_threshold=corr_threshold,
    )


@dataclass(frozen=True, eq=False)
class FunctionalDDCResult:
    cells: CellFlagMatrix
    grids: np.ndarray
    row_flags: np.ndarray
    row_labels: tuple[str, ...]
    coefficient_sums: np.ndarray


def functional_ddc(coefs, basis, p_cut: float = DEFAULT_P_CUT,
                   labels: Sequence[str] | None = None) -> FunctionalDDCResult:
    """DDC on a coefficient matrix (rows = densities) mapped to the grid.

    ``coefs`` is an ``(n, K)`` array or a list of ``SplineCoefficients``
    sharing ``basis``.  Identical rows yield zero anomaly functions.
    """
    from .splines import SplineCoefficients, anomaly_to_grid

    if len(coefs) and isinstance(coefs[0], SplineCoefficients):
        labels = labels or tuple(c.label or str(i) for i, c in enumerate(coefs))
        coefs = np.vstack([c.coefficients for c in coefs])
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim != 2 or coefs.shape[1] != basis.size:
        raise InvalidInputError(
            f"coefficient matrix of shape {coefs.shape} does not match a basis of size {basis.size}"
        )
    X = DataMatrix(coefs, tuple(f"b{k + 1}" for k in range(basis.size)), tuple(labels or ()))
    cells = ddc(X, p_cut, allow_degenerate=True)
    grids = anomaly_to_grid(cells.levels, basis)
    return FunctionalDDCResult(cells, grids, cells.row_flags, X.row_labels, coefs.sum(axis=1))


def pairwise_logratios(parts, labels: Sequence[str]):
    """All ``ln(x_i / x_j)`` with ``i < j``; returns values, labels and index pairs."""
    parts = np.asarray(parts, dtype=float)
    pairs = list(combinations(range(parts.shape[1]), 2))
    logp = np.log(parts)
    values = np.column_stack([logp[:, i] - logp[:, j] for i, j in pairs])
    names = tuple(f"ln({labels[i]}/{labels[j]})" for i, j in pairs)
    return values, names, pairs


@dataclass(frozen=True, eq=False)
class LogratioDDCResult:
    cells: CellFlagMatrix
    pairs: tuple[tuple[int, int], ...]
    part_labels: tuple[str, ...]
    part_levels: np.ndarray
    part_fractions: np.ndarray
    part_flags: np.ndarray
    agg_fraction: float
    row_labels: tuple[str, ...]


def lr_ddc(comps, p_cut: float = DEFAULT_P_CUT, agg_fraction: float = DEFAULT_AGG_FRACTION,
           labels: Sequence[str] | None = None, floor: float = 1e-12) -> LogratioDDCResult:
    """DDC on all pairwise logratios of compositions, aggregated per part.

    A part is flagged for a row when at least ``agg_fraction`` of the
    logratios involving it are flagged.  Its level is the mean of those
    logratios' levels, signed so that the part sits in the numerator.
    """
    from .decomposition import InformationComposition, PART_LABELS

    part_labels = PART_LABELS
    if len(comps) and isinstance(comps[0], InformationComposition):
        part_labels = comps[0].labels
        parts = np.vstack([c.as_array() for c in comps])
    else:
        parts = np.asarray(comps, dtype=float)
        if parts.ndim != 2:
            raise InvalidInputError("compositions must form a 2-D array")
        if parts.shape[1] != len(part_labels):
            part_labels = tuple(f"x{k + 1}" for k in range(parts.shape[1]))
    if parts.shape[0] < 3:
        raise InvalidInputError("LR-DDC needs at least 3 compositions")
    if not 0 < agg_fraction <= 1:
        raise InvalidInputError(f"agg_fraction must lie in (0, 1], got {agg_fraction}")
    if not np.all(np.isfinite(parts)) or np.any(parts < 0):
        raise InvalidInputError("composition parts must be finite and non-negative")
    parts = np.maximum(parts, floor)
    values, names, pairs = pairwise_logratios(parts, part_labels)
    X = DataMatrix(values, names, tuple(labels or ()))
    cells = ddc(X, p_cut, allow_degenerate=True)

    D = parts.shape[1]
    n = parts.shape[0]
    part_levels = np.zeros((n, D))
    part_fractions = np.zeros((n, D))
    for k in range(D):
        cols, signs = [], []
        for col, (i, j) in enumerate(pairs):
            if i == k:
                cols.append(col)
                signs.append(1.0)
            elif j == k:
                cols.append(col)
                signs.append(-1.0)
        signs = np.array(signs)
        part_levels[:, k] = (cells.levels[:, cols] * signs).mean(axis=1)
        part_fractions[:, k] = cells.cell_flags[:, cols].mean(axis=1)
    part_flags = part_fractions >= agg_fraction - 1e-12
    return LogratioDDCResult(
        cells, tuple(pairs), tuple(part_labels), part_levels, part_fractions,
        part_flags, float(agg_fraction), X.row_labels,
    )

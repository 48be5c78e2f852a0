"""Conventional univariate EDA: ECDF, quartiles and the Tukey upper fence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidInputError

__all__ = ["ECDF", "UnivariateSummary", "ecdf", "summary", "quantile", "exceedances"]


def _clean(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InvalidInputError("empty input")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("input contains non-finite values")
    return x


@dataclass(frozen=True, eq=False)
class ECDF:
    """Right-continuous empirical distribution function.

    ``values`` are the sorted distinct observations and ``fractions`` the
    cumulative share of observations ``<=`` each of them.
    """

    values: np.ndarray
    fractions: np.ndarray
    n: int

    def __call__(self, x):
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        out = np.where(idx > 0, self.fractions[np.maximum(idx - 1, 0)], 0.0)
        return out if np.ndim(out) else float(out)

    def pairs(self):
        return list(zip(self.values.tolist(), self.fractions.tolist()))


def ecdf(x) -> ECDF:
    x = np.sort(_clean(x))
    n = x.size
    values, counts = np.unique(x, return_counts=True)
    fractions = np.cumsum(counts) / n
    return ECDF(values, fractions, n)


def _type7(s: np.ndarray, q):
    """Type-7 quantiles of the sorted array ``s``, from the defining formula."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise InvalidInputError("quantile levels must lie in [0, 1]")
    h = (s.size - 1) * q
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, s.size - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def quantile(x, q):
    """Type-7 quantile: linear interpolation at plotting position (k-1)/(n-1)."""
    out = _type7(np.sort(_clean(x)), q)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class UnivariateSummary:
    n: int
    min: float
    q1: float
    q2: float
    q3: float
    max: float
    iqr: float
    tuf: float
    n_above_tuf: int
    frac_above_tuf: float

    FIELDS = ("n", "min", "q1", "q2", "q3", "max", "iqr", "tuf", "n_above_tuf", "frac_above_tuf")

    def as_row(self) -> list:
        return [getattr(self, k) for k in self.FIELDS]


def summary(x) -> UnivariateSummary:
    """Quartiles, IQR and the Tukey upper fence ``Q3 + 1.5 IQR`` on the linear scale."""
    x = _clean(x)
    if x.size < 4:
        raise InsufficientDataError(f"summary needs at least 4 values, got {x.size}")
    q1, q2, q3 = _type7(np.sort(x), [0.25, 0.5, 0.75])
    iqr = q3 - q1
    tuf = q3 + 1.5 * iqr
    above = int(np.count_nonzero(x > tuf))
    return UnivariateSummary(
        n=int(x.size),
        min=float(x.min()),
        q1=float(q1),
        q2=float(q2),
        q3=float(q3),
        max=float(x.max()),
        iqr=float(iqr),
        tuf=float(tuf),
        n_above_tuf=above,
        frac_above_tuf=above / x.size,
    )


def exceedances(x, tuf: float) -> np.ndarray:
    """Indices of the values strictly above the fence."""
    return np.flatnonzero(_clean(x) > tuf)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bayesfda.eda import ecdf, exceedances, quantile, summary
from bayesfda.errors import InsufficientDataError, InvalidInputError


def naive_quantile(x, q):
    """Type-7 quantile from sorted order statistics, written out by hand."""
    s = sorted(x)
    h = (len(s) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def test_ecdf_single_value():
    e = ecdf([5.0])
    assert e(5.0) == 1.0 and e(4.999) == 0.0
    assert e.pairs() == [(5.0, 1.0)]


def test_ecdf_midpoint():
    assert ecdf([1, 2, 3, 4])(2.5) == 0.5


def test_ecdf_right_continuous_and_ties():
    e = ecdf([3, 1, 2, 2])
    assert e(2) == 0.75
    assert e(max([3, 1, 2, 2])) == 1.0
    assert np.all(np.diff(e.fractions) > 0)


def test_ecdf_uniform_ks():
    x = np.random.default_rng(0).uniform(size=1000)
    e = ecdf(x)
    s = np.sort(x)
    n = len(s)
    dev = max(np.max(np.arange(1, n + 1) / n - s), np.max(s - np.arange(n) / n))
    assert dev <= 0.06
    assert e(s[-1]) == 1.0


def test_ecdf_empty():
    with pytest.raises(InvalidInputError):
        ecdf([])


def test_summary_tuf_formula():
    # quartiles 10 and 30 -> IQR 20, TUF 60
    x = [0, 10, 20, 30, 40]
    s = summary(x)
    assert (s.q1, s.q3, s.iqr, s.tuf) == (10, 30, 20, 60)


def test_summary_constant():
    s = summary([4.0] * 9)
    assert s.iqr == 0 and s.tuf == 4.0 and s.n_above_tuf == 0


def test_summary_one_to_hundred():
    s = summary(np.arange(1, 101))
    assert (s.q1, s.q2, s.q3, s.tuf) == (25.75, 50.5, 75.25, 149.5)


def test_summary_needs_four():
    with pytest.raises(InsufficientDataError):
        summary([1, 2, 3])


def test_quantile_matches_naive():
    x = [5.0, 1.0, 3.5, 2.0, 8.0, 7.0]
    for q in (0.0, 0.1, 0.25, 0.5, 0.9, 1.0):
        assert quantile(x, q) == naive_quantile(x, q)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1e4, allow_nan=False), min_size=4, max_size=60),
       st.floats(0.1, 50))
def test_summary_scale_equivariance(x, c):
    a, b = summary(x), summary([c * v for v in x])
    for name in ("q1", "q2", "q3", "tuf"):
        assert getattr(b, name) == pytest.approx(c * getattr(a, name), rel=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=80))
def test_summary_invariants_and_exceedances(x):
    s = summary(x)
    assert s.min <= s.q1 <= s.q2 <= s.q3 <= s.max
    assert s.iqr == s.q3 - s.q1
    assert s.tuf == s.q3 + 1.5 * s.iqr
    assert exceedances(x, s.tuf).tolist() == [i for i, v in enumerate(x) if v > s.tuf]
    assert s.n_above_tuf == sum(v > s.tuf for v in x)

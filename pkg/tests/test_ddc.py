import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bayesfda.bayes import Box, DensityGrid, clr
from bayesfda.ddc import (DataMatrix, cutoff, ddc, functional_ddc, lr_ddc, mad,
                          pairwise_logratios, robust_correlation, robust_standardize)
from bayesfda.decomposition import PART_LABELS, InformationComposition
from bayesfda.errors import DegenerateDataError, InvalidInputError
from bayesfda.splines import build_basis, fit_clr_spline


# --- standardisation / cutoff / correlation -----------------------------------

def test_robust_standardize_hand_example():
    z = robust_standardize(np.array([[1.0], [2.0], [3.0]])).values[:, 0]
    assert np.allclose(z, [-1 / 1.4826, 0, 1 / 1.4826], atol=1e-12)
    assert np.allclose(z, [-0.6745, 0, 0.6745], atol=1e-4)


def test_robust_standardize_symmetric_column():
    x = 2.5 + np.array([-7.0, -3.0, -1.0, 0.0, 1.0, 3.0, 7.0])
    z = robust_standardize(x[:, None]).values[:, 0]
    assert np.allclose(z, -z[::-1], atol=1e-12)


def test_robust_standardize_names_constant_column():
    X = DataMatrix(np.column_stack([np.arange(5.0), np.full(5, 2.0)]), ("a", "b"))
    with pytest.raises(DegenerateDataError) as err:
        robust_standardize(X)
    assert err.value.columns == ["b"]


def test_mad_ignores_nan():
    assert mad([1.0, np.nan, 2.0, 3.0]) == 1.0


def test_cutoff_values():
    assert cutoff(0.99) == pytest.approx(2.5758, abs=1e-3)
    assert cutoff(0.5) == pytest.approx(0.6745, abs=1e-3)
    assert cutoff(0.99) == pytest.approx(stats.norm.ppf(0.995), abs=1e-10)
    assert cutoff(0.99) > cutoff(0.95)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(InvalidInputError):
            cutoff(bad)


def test_robust_correlation_extremes():
    a = np.random.default_rng(0).standard_normal(30)
    assert robust_correlation(a, a) == 1.0
    assert robust_correlation(a, -a) == -1.0
    with pytest.raises(DegenerateDataError):
        robust_correlation(np.ones(5), np.ones(5))


def test_robust_correlation_monte_carlo():
    rng = np.random.default_rng(2024)
    xy = rng.multivariate_normal([0, 0], [[1, 0.8], [0.8, 1]], size=10000)
    assert robust_correlation(xy[:, 0], xy[:, 1]) == pytest.approx(0.8, abs=0.05)


# --- ddc ----------------------------------------------------------------------

def test_single_large_cell_single_column():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 1))
    x[7, 0] += 10
    r = ddc(x)
    assert r.cell_flags[7, 0]
    assert r.levels[7, 0] > 0.9
    assert r.row_flags[7]


def test_single_large_cell_among_independent_columns():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 5))
    x[12, 3] += 10
    r = ddc(x)
    # hand trace: no column pair is correlated, so nothing is predicted and r = z
    assert np.all(r.predicted == 0)
    z = robust_standardize(x).values
    assert np.allclose(r.residuals, z)
    assert r.cell_flags[12, 3]
    assert r.levels[12, 3] > 0.9
    assert np.array_equal(r.cell_flags, np.abs(z) > cutoff(0.99))


def test_identical_rows_are_degenerate():
    with pytest.raises(DegenerateDataError):
        ddc(np.tile([1.0, 2.0, 3.0], (6, 1)))


def test_perfectly_correlated_pair():
    rng = np.random.default_rng(3)
    a = rng.standard_normal(30)
    X = np.column_stack([a, 2 * a + 1])
    X[5, 0] += 4.0  # moderate break, not univariately extreme in either column
    r = ddc(X)
    assert r.cell_flags[5, 0]
    assert not r.cell_flags[5, 1]
    # every other flag is a univariately extreme cell whose mate is extreme too
    z = robust_standardize(X).values
    other = r.cell_flags.copy()
    other[5, 0] = False
    assert np.all(np.abs(z[other]) > cutoff(0.99))


def test_levels_consistent_with_flags():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 6))
    X[:, 1] = X[:, 0] + 0.3 * rng.standard_normal(40)
    X[[3, 9], [0, 4]] += [7, -8]
    r = ddc(X)
    assert np.all(np.abs(r.levels) <= 1)
    assert np.array_equal(r.cell_flags, np.abs(r.levels) > r.flag_threshold)
    assert np.array_equal(np.sign(r.levels), np.sign(r.residuals))


def test_single_column_reduces_to_univariate_rule():
    x = np.random.default_rng(5).standard_normal((60, 1)) * 3 + 1
    x[[2, 40], 0] += [15, -12]
    r = ddc(x, p_cut=0.95)
    z = robust_standardize(x).values
    assert np.array_equal(r.cell_flags, np.abs(z) > cutoff(0.95))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_affine_and_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    n, p = 30, 4
    X = rng.standard_normal((n, p))
    X[:, 1] += 0.9 * X[:, 0]
    X[rng.integers(n), rng.integers(p)] += 8
    r = ddc(X)
    a = rng.uniform(0.5, 5, p) * rng.choice([-1, 1], p)
    b = rng.uniform(-10, 10, p)
    r2 = ddc(X * a + b)
    assert np.array_equal(r.cell_flags, r2.cell_flags)
    assert np.array_equal(r.row_flags, r2.row_flags)
    perm = rng.permutation(n)
    r3 = ddc(X[perm])
    assert np.array_equal(r.cell_flags[perm], r3.cell_flags)
    assert np.array_equal(r.row_flags[perm], r3.row_flags)


def test_degenerate_column_flagged_wholesale():
    rng = np.random.default_rng(6)
    X = np.column_stack([rng.standard_normal(20), np.full(20, 3.0)])
    X[4, 1] = 5.0
    r = ddc(X)
    assert r.degenerate_columns == ("V2",)
    assert r.cell_flags[:, 1].tolist() == [i == 4 for i in range(20)]
    assert r.levels[4, 1] == 1.0


def test_all_degenerate_allowed():
    r = ddc(np.ones((5, 3)), allow_degenerate=True)
    assert not r.cell_flags.any() and not r.row_flags.any()


def test_metadata_records_thresholds():
    r = ddc(np.random.default_rng(7).standard_normal((20, 3)))
    m = r.metadata()
    assert m["p_cut"] == 0.99 and m["correlation_threshold"] == 0.5
    assert m["columns"] == ["V1", "V2", "V3"]


# --- functional ddc -----------------------------------------------------------

UNIT = Box((0.0,), (1.0,))


def _coef(f, basis):
    return fit_clr_spline(clr(f), basis).coefficients


def test_functional_ddc_identical_rows_zero():
    basis = build_basis(UNIT, 13, 4, nodes=64)
    x = basis.grid.axes[0]
    f = DensityGrid(basis.grid, np.exp(-(x - 0.4) ** 2 / 0.02) + 0.01)
    C = np.tile(_coef(f, basis), (8, 1))
    res = functional_ddc(C, basis)
    assert np.all(res.grids == 0)
    assert not res.row_flags.any()


def test_functional_ddc_bump_localised():
    basis = build_basis(Box((0.0,), (6.0,)), 13, 4, nodes=128)
    x = basis.grid.axes[0]
    base = stats.norm.pdf(x, 2.5, 0.6)
    bump = stats.norm.pdf(x, 4.8, 0.25)
    rows = []
    for k in range(20):
        # small per-compartment variation keeps the columns non-degenerate
        shift = 0.03 * np.sin(k)
        rows.append(_coef(DensityGrid(basis.grid, stats.norm.pdf(x, 2.5 + shift, 0.6) + 1e-4),
                          basis))
    rows.append(_coef(DensityGrid(basis.grid, 0.9 * base + 0.1 * bump + 1e-4), basis))
    res = functional_ddc(np.vstack(rows), basis)
    g = res.grids[-1]
    peak = x[np.argmax(g)]
    assert g.max() > 0.5
    assert abs(peak - 4.8) < 0.75
    assert np.all(np.abs(res.grids) <= 1)


def test_functional_ddc_shape_error():
    basis = build_basis(UNIT, 6, 4, nodes=32)
    with pytest.raises(InvalidInputError):
        functional_ddc(np.zeros((5, 7)), basis)


# --- lr-ddc -------------------------------------------------------------------

def _compositions(n, seed):
    rng = np.random.default_rng(seed)
    base = np.array([0.25, 0.2, 0.3, 0.1, 0.05, 0.06, 0.04])
    comps = base * np.exp(0.08 * rng.standard_normal((n, 7)))
    return comps / comps.sum(axis=1, keepdims=True)


def test_pairwise_logratios_count_and_values():
    parts = np.array([[1.0, 2, 4, 8, 16, 32, 64]])
    values, names, pairs = pairwise_logratios(parts, PART_LABELS)
    assert values.shape == (1, 21) and len(names) == 21 and len(pairs) == 21
    assert names[0] == "ln(f(Cu)/f(Pb))"
    for col, (i, j) in enumerate(pairs):
        assert values[0, col] == pytest.approx(np.log(2.0) * (i - j))


def test_lr_ddc_identical_no_flags():
    comps = np.tile([0.3, 0.2, 0.2, 0.1, 0.1, 0.05, 0.05], (10, 1))
    res = lr_ddc(comps)
    assert res.cells.shape == (10, 21)
    assert not res.part_flags.any() and not res.cells.cell_flags.any()


def test_lr_ddc_tripled_cu():
    comps = _compositions(20, 11)
    comps[13, 0] *= 3
    comps[13] /= comps[13].sum()
    res = lr_ddc([InformationComposition(tuple(c)) for c in comps])
    assert res.part_flags[13, 0]
    assert res.part_levels[13, 0] > 0.5
    # all six logratios involving f(Cu) move by ln 3, far beyond their spread
    assert res.part_fractions[13, 0] == 1.0


def test_lr_ddc_scale_invariance():
    comps = _compositions(15, 12)
    comps[4, 2] *= 4
    a = lr_ddc(comps)
    scales = np.random.default_rng(0).uniform(0.1, 10, (15, 1))
    b = lr_ddc(comps * scales)
    assert np.array_equal(a.part_flags, b.part_flags)
    assert np.allclose(a.part_levels, b.part_levels, atol=1e-10)


def test_lr_ddc_validation():
    with pytest.raises(InvalidInputError):
        lr_ddc(_compositions(2, 0))
    with pytest.raises(InvalidInputError):
        lr_ddc(_compositions(5, 0), agg_fraction=0.0)
    bad = _compositions(5, 0)
    bad[0, 0] = -1
    with pytest.raises(InvalidInputError):
        lr_ddc(bad)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bayesfda.bayes import (Box, DensityGrid, Grid, clr, distance, inner_product, integrate,
                            lift, norm, perturb, uniform)
from bayesfda.decomposition import (PART_LABELS, InformationComposition, arithmetic_marginal,
                                    clr_composition, decompose, geometric_marginal,
                                    information_composition, recompose)
from bayesfda.errors import InvalidDimsError, UndefinedCompositionError


def gaussian3(grid, cov):
    pts = grid.points()
    v = stats.multivariate_normal(mean=np.zeros(3), cov=cov).pdf(pts)
    return DensityGrid(grid, v.reshape(grid.shape))


def product_density(rng, grid):
    factors = []
    vals = np.ones(grid.shape)
    for k in range(grid.ndim):
        g1 = grid.sub((k,))
        f = DensityGrid(g1, np.exp(rng.standard_normal(g1.shape))).normalized()
        factors.append(f)
        shape = [1] * grid.ndim
        shape[k] = -1
        vals = vals * f.values.reshape(shape)
    return DensityGrid(grid, vals), factors


GRID3 = Grid(Box((-3.0, -3.0, -3.0), (3.0, 3.0, 3.0)), (20, 20, 20))


# --- marginals ------------------------------------------------------------------

def test_geometric_marginal_of_product():
    rng = np.random.default_rng(0)
    grid = Grid(Box((0.0, 1.0, -1.0), (1.0, 3.0, 2.0)), (7, 8, 9))
    f, factors = product_density(rng, grid)
    for k in range(3):
        g = geometric_marginal(f, (k,))
        a = arithmetic_marginal(f, (k,))
        assert np.allclose(g.values, factors[k].values, rtol=1e-10)
        assert np.allclose(a.values, factors[k].values, rtol=1e-10)


def test_marginals_of_uniform():
    u = uniform(Grid(Box((0.0, 0.0, 0.0), (1.0, 2.0, 3.0)), (5, 5, 5)))
    for dims in [(0,), (1,), (2,), (0, 1), (1, 2)]:
        for fn in (geometric_marginal, arithmetic_marginal):
            m = fn(u, dims)
            assert np.allclose(m.values, m.values.flat[0])


def test_geometric_marginal_bruteforce_and_narrower():
    cov = np.full((3, 3), 0.5) + 0.5 * np.eye(3)
    f = gaussian3(GRID3, cov)
    g1 = geometric_marginal(f, (0,))
    # nested-loop log-mean over the removed axes
    ax = GRID3.axes
    w = [GRID3.axis_weights[k] / GRID3.box.widths[k] for k in range(3)]
    L = np.log(f.values)
    ref = np.empty(20)
    for i in range(20):
        acc = 0.0
        for j in range(20):
            for k in range(20):
                acc += w[1][j] * w[2][k] * L[i, j, k]
        ref[i] = np.exp(acc)
    ref /= integrate(ref, GRID3.sub((0,)))
    assert np.allclose(g1.values, ref, rtol=1e-10)
    a1 = arithmetic_marginal(f, (0,))
    x = ax[0]
    var_g = integrate(x * x * g1.values, g1.grid)
    var_a = integrate(x * x * a1.values, a1.grid)
    assert var_g < var_a


def test_arithmetic_marginal_gaussian_analytic():
    cov = np.full((3, 3), 0.5) + 0.5 * np.eye(3)
    grid = Grid(Box((-7.0, -7.0, -7.0), (7.0, 7.0, 7.0)), (61, 61, 61))
    f = gaussian3(grid, cov)
    a = arithmetic_marginal(f, (1,))
    x = grid.axes[1]
    ref = stats.norm.pdf(x)
    ref = ref / integrate(ref, a.grid)
    assert np.max(np.abs(a.values - ref)) < 1e-6


def test_marginal_dims_errors():
    f = uniform(Grid(Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), (4, 4, 4)))
    for bad in [(), (0, 1, 2)]:
        with pytest.raises(InvalidDimsError):
            geometric_marginal(f, bad)
        with pytest.raises(InvalidDimsError):
            arithmetic_marginal(f, bad)


# --- decomposition ----------------------------------------------------------------

def test_independent_product_has_uniform_interactions():
    rng = np.random.default_rng(1)
    f, factors = product_density(rng, Grid(Box((0.0, 0.0, 0.0), (1.0, 2.0, 3.0)), (8, 6, 7)))
    d = decompose(f)
    for key, part in d.interactions.items():
        assert np.allclose(part.values, part.values.flat[0], rtol=1e-10), key
    ic = information_composition(d, f)
    assert sum(ic.parts[:3]) == pytest.approx(1.0, abs=1e-10)
    assert max(ic.parts[3:]) < 1e-20


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([2, 3]))
def test_decomposition_identities(seed, ndim):
    rng = np.random.default_rng(seed)
    shape = tuple(rng.integers(4, 10, ndim))
    grid = Grid(Box(tuple([0.0] * ndim), tuple(rng.uniform(0.5, 3, ndim))), shape)
    f = DensityGrid(grid, np.exp(rng.standard_normal(shape)))
    d = decompose(f)
    nf = norm(f)
    assert distance(f, recompose(d)) <= 1e-6 * nf
    keys = d.keys
    lifted = {k: d.lifted(k) for k in keys}
    norms = {k: norm(v) for k, v in lifted.items()}
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            ip = abs(inner_product(lifted[a], lifted[b]))
            assert ip <= max(1e-6 * norms[a] * norms[b], 1e-10)
    assert abs(nf ** 2 - sum(v ** 2 for v in norms.values())) <= 1e-6 * nf ** 2


def test_single_correlation_signature():
    cov = np.eye(3)
    cov[0, 1] = cov[1, 0] = 0.6
    f = gaussian3(GRID3, cov)
    d = decompose(f)
    sq = d.squared_norms()
    assert sq[(0, 1)] > 0.01
    assert max(sq[(0, 2)], sq[(1, 2)], sq[(0, 1, 2)]) <= 1e-12
    # brute-force norm of i12 on the 2-D sub grid
    L = np.log(f.values)
    G = GRID3
    w = [G.axis_weights[k] / G.box.widths[k] for k in range(3)]
    m01 = np.einsum("ijk,k->ij", L, w[2])
    m0 = np.einsum("ij,j->i", m01, w[1])
    m1 = np.einsum("ij,i->j", m01, w[0])
    m = np.einsum("i,i->", m0, w[0])
    i12 = m01 - m0[:, None] - m1[None, :] + m
    ref = float(np.sum(G.weights * i12[:, :, None] ** 2))
    assert sq[(0, 1)] == pytest.approx(ref, rel=1e-10)
    ic = information_composition(d, f)
    assert ic["f(Cu,Pb)"] > ic["f(Cu,Zn)"] and ic["f(Cu,Pb)"] > ic["f(Pb,Zn)"]
    assert ic["f(Cu,Zn)"] < 1e-12 and ic["f(Pb,Zn)"] < 1e-12


def test_projection_property():
    rng = np.random.default_rng(2)
    grid = Grid(Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), (6, 5, 7))
    f = DensityGrid(grid, np.exp(rng.standard_normal(grid.shape)))
    g1 = DensityGrid(grid.sub((1,)), np.exp(rng.standard_normal(5)))
    d0 = decompose(f)
    d1 = decompose(perturb(f, lift(g1, grid, (1,))))
    assert np.allclose(clr(d1.marginals[1]).values, clr(d0.marginals[1]).values + clr(g1).values,
                       atol=1e-10)
    for key in d0.interactions:
        assert np.allclose(d1.clr_parts[key].values, d0.clr_parts[key].values, atol=1e-10)


def test_bivariate_decomposition():
    rng = np.random.default_rng(3)
    grid = Grid(Box((0.0, 0.0), (2.0, 1.0)), (9, 11))
    f = DensityGrid(grid, np.exp(rng.standard_normal(grid.shape)))
    d = decompose(f)
    assert set(d.keys) == {(0,), (1,), (0, 1)}
    assert distance(f, recompose(d)) < 1e-10
    ic = information_composition(d, f, elements=("Pb", "Zn"))
    assert ic.labels == ("f(Pb)", "f(Zn)", "f(Pb,Zn)")
    assert sum(ic.parts) == pytest.approx(1.0, abs=1e-10)


def test_decompose_rejects_1d():
    with pytest.raises(InvalidDimsError):
        decompose(uniform(Grid(Box((0.0,), (1.0,)), (5,))))


# --- information composition -------------------------------------------------------

def test_composition_of_uniform_undefined():
    u = uniform(Grid(Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), (4, 4, 4)))
    with pytest.raises(UndefinedCompositionError):
        information_composition(decompose(u), u)


def test_composition_labels_and_sum():
    rng = np.random.default_rng(4)
    grid = Grid(Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), (6, 6, 6))
    f = DensityGrid(grid, np.exp(rng.standard_normal(grid.shape)))
    ic = information_composition(decompose(f), f)
    assert ic.labels == PART_LABELS
    assert sum(ic.parts) == pytest.approx(1.0, abs=1e-10)
    assert all(0 <= p <= 1 for p in ic.parts)


def test_clr_composition():
    assert np.allclose(clr_composition(np.full(7, 1 / 7)), 0.0, atol=1e-15)
    c = np.array([0.4, 0.3, 0.1, 0.05, 0.05, 0.05, 0.05])
    logs = [np.log(v) for v in c]
    ref = [v - sum(logs) / 7 for v in logs]
    assert np.allclose(clr_composition(InformationComposition(tuple(c))), ref, rtol=0, atol=1e-12)
    z = clr_composition(np.array([0.5, 0.5, 0, 0, 0, 0, 0]))
    assert np.isfinite(z).all() and abs(z.sum()) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=7, max_size=7), st.floats(0.01, 100))
def test_clr_composition_sums_to_zero_and_scale_invariant(parts, c):
    z = clr_composition(np.array(parts))
    assert abs(z.sum()) < 1e-9
    assert np.allclose(clr_composition(c * np.array(parts)), z, atol=1e-9)

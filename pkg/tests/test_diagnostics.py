import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from adda.diagnostics import (
    DensityEstimate,
    accuracy,
    accuracy_curve,
    binned_kde,
    make_grid,
    obm_mcse,
    se_curve,
    silverman_bandwidth,
    tv_distance,
)
from adda.engine import DrawMatrix


def _kde(x, h=None):
    h = silverman_bandwidth(x) if h is None else h
    return binned_kde(x, make_grid(x.min(), x.max(), h), h)


def test_kde_matches_normal_pdf():
    # sampling noise at the mode is about 0.0035, so the 0.01 bound on the
    # maximum over 401 points fails for roughly one seed in ten
    hits = 0
    for seed in range(10):
        est = _kde(np.random.default_rng(seed).standard_normal(100_000))
        assert est.grid.size == 401
        assert 0.99 <= est.integral() <= 1.01
        hits += np.max(np.abs(est.values - stats.norm.pdf(est.grid))) < 0.01
    assert hits >= 8


def test_binning_matches_exact_kde():
    x = np.random.default_rng(0).standard_normal(20_000)
    h = silverman_bandwidth(x)
    est = _kde(x, h)
    exact = stats.norm.pdf((est.grid[:, None] - x[None, :]) / h).mean(1) / h
    assert np.max(np.abs(est.values - exact)) < 2e-4


def test_kde_translation():
    x = np.random.default_rng(1).standard_normal(2000)
    a, b = _kde(x), _kde(x + 5.0)
    assert np.allclose(b.grid, a.grid + 5.0)
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_kde_errors():
    with pytest.raises(ValueError):
        binned_kde(np.zeros(1), np.linspace(-1, 1, 11), 0.1)
    with pytest.raises(ValueError):
        binned_kde(np.zeros(3), np.linspace(-1, 1, 11), 0.0)
    with pytest.raises(ValueError):
        binned_kde(np.array([0.0, 5.0]), np.linspace(-1, 1, 11), 0.1)
    with pytest.raises(ValueError):
        silverman_bandwidth(np.ones(10))


def test_silverman_fallback_to_positive_spread():
    # IQR is zero but sd is not
    x = np.concatenate([np.zeros(100), [1.0]])
    assert silverman_bandwidth(x) > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), t=st.integers(2, 300), scale=st.floats(1e-3, 1e3))
def test_kde_nonnegative_and_normalized(seed, t, scale):
    x = scale * np.random.default_rng(seed).standard_normal(t)
    est = _kde(x)
    assert np.all(est.values >= 0)
    assert 0.98 <= est.integral() <= 1.01


def test_tv_examples():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(10_000), rng.standard_normal(10_000) + 10.0
    h = silverman_bandwidth(x)
    g = make_grid(min(x.min(), y.min()), max(x.max(), y.max()), h)
    p, q = binned_kde(x, g, h), binned_kde(y, g, h)
    assert tv_distance(p, p) == 0.0
    assert tv_distance(p, q) > 0.99
    assert tv_distance(p, q) == tv_distance(q, p)
    assert 1 - accuracy(rng.standard_normal(100_000), rng.standard_normal(100_000)) < 0.02


def test_tv_clamped_and_grid_mismatch():
    g = np.linspace(0, 1, 11)
    p = DensityEstimate(g, np.full(11, 3.0))
    q = DensityEstimate(g, np.zeros(11))
    assert tv_distance(p, q) == 1.0
    with pytest.raises(ValueError):
        tv_distance(p, DensityEstimate(np.linspace(0, 2, 11), np.zeros(11)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), shift=st.floats(-5, 5))
def test_accuracy_in_unit_interval_and_symmetric_tv(seed, shift):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(200), rng.standard_normal(200) + shift
    acc = accuracy(a, b)
    assert 0.0 <= acc <= 1.0
    h = silverman_bandwidth(b)
    g = make_grid(min(a.min(), b.min()), max(a.max(), b.max()), h)
    p, q = binned_kde(a, g, h), binned_kde(b, g, h)
    assert tv_distance(p, q) == tv_distance(q, p)


def test_obm_examples():
    rng = np.random.default_rng(3)
    assert obm_mcse(rng.standard_normal(10_000)) == pytest.approx(0.01, rel=0.2)
    assert obm_mcse(np.full(100, 2.5)) == 0.0
    e = rng.standard_normal(100_000)
    x = np.empty_like(e)
    x[0] = e[0] / np.sqrt(1 - 0.25)
    for i in range(1, e.size):
        x[i] = 0.5 * x[i - 1] + e[i]
    assert obm_mcse(x) == pytest.approx(2 / np.sqrt(100_000), rel=0.2)
    with pytest.raises(ValueError):
        obm_mcse(np.arange(3.0))


def test_obm_matches_direct_window_sum():
    x = np.random.default_rng(4).standard_normal(103)
    t, b = 103, 10
    wins = np.array([x[j:j + b].mean() for j in range(t - b + 1)])
    var = t * b / ((t - b) * (t - b + 1)) * np.sum((wins - x.mean()) ** 2)
    assert obm_mcse(x) == pytest.approx(np.sqrt(var / t), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3))
def test_obm_scale_equivariance(seed, k):
    x = np.random.default_rng(seed).standard_normal(500)
    assert obm_mcse(k * x) == pytest.approx(abs(k) * obm_mcse(x), rel=1e-9)


def _dm(*cols):
    return DrawMatrix([f"c{j}" for j in range(len(cols))], np.column_stack(cols))


def test_curves_identity_and_shift():
    rng = np.random.default_rng(5)
    a = _dm(rng.standard_normal(10_000), rng.standard_normal(10_000))
    t = [100, 1000, 10_000]
    acc = accuracy_curve(a, a, t)
    assert np.all(acc.average >= 0.999)
    assert np.all(se_curve(a, a, t).average == 0.0)
    b = _dm(rng.standard_normal(10_000) + 4.0)
    assert accuracy_curve(b, _dm(rng.standard_normal(10_000)), [10_000]).average[0] < 0.05
    df = acc.to_frame()
    assert list(df.columns) == ["t", "c0", "c1", "average"]


def test_se_curve_independent_chains():
    rng = np.random.default_rng(6)
    r = se_curve(_dm(rng.standard_normal(100_000)), _dm(rng.standard_normal(100_000)), [100_000])
    assert r.average[0] < 0.002
    assert np.all(r.values >= 0)


def test_curve_errors():
    a = _dm(np.zeros(50) + np.arange(50))
    with pytest.raises(ValueError):
        accuracy_curve(a, _dm(np.arange(50.0), np.arange(50.0)), [10])
    with pytest.raises(ValueError):
        se_curve(a, a, [51])
    with pytest.raises(ValueError):
        accuracy_curve(a, a, [])


def test_accuracy_consistency_over_replications():
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        e1, e2 = rng.standard_normal((2, 20_000))
        x, y = np.empty(20_000), np.empty(20_000)
        x[0], y[0] = e1[0], e2[0]
        for i in range(1, 20_000):
            x[i] = 0.5 * x[i - 1] + e1[i]
            y[i] = 0.5 * y[i - 1] + e2[i]
        acc = accuracy_curve(_dm(x), _dm(y), [500, 20_000]).average
        wins += acc[1] >= acc[0]
    assert wins >= 9

import numpy as np
import pytest
from scipy.special import expit, log_expit

from adda.diagnostics import obm_mcse
from adda.distributions import rng_stream
from adda.engine import SelectionPolicy, run_chain
from adda.errors import DomainError
from adda.models import LogisticData, LogisticKernel, LogisticPrior
from adda.models.logistic import (
    OmegaBlock,
    logistic_drift,
    logistic_i_step,
    logistic_p_step,
    predict_prob,
)

from conftest import mc_se
from reference import parent_da


def _one_obs_step(rng):
    # n=1, p=1, x=1, s=1, y=1, omega=1, prior N(0, 1)
    block = OmegaBlock(np.array([1.0]), np.array([[1.0]]))
    return logistic_p_step([block], np.array([0.5]), np.eye(1), np.zeros(1), rng)


def test_p_step_hand_oracle():
    # V = 1 / (1 + 1) = 1/2, m = V * (y - s/2) = 0.25
    _, mean = _one_obs_step(rng_stream(0, 0))
    assert mean == pytest.approx([0.25])
    rng = rng_stream(1, 0)
    draws = np.array([_one_obs_step(rng)[0][0] for _ in range(20_000)])
    assert abs(draws.mean() - 0.25) < 3 * mc_se(draws)
    assert draws.var() == pytest.approx(0.5, rel=0.04)


def test_kappa():
    data = LogisticData([7], [10], [[1.0]])
    kern = LogisticKernel(data, [np.array([0])])
    assert kern._xtk == pytest.approx([2.0])


def test_p_step_rejects_nonpositive_omega():
    block = OmegaBlock(np.array([1.0, 0.0]), np.eye(1))
    with pytest.raises(DomainError):
        logistic_p_step([block], np.zeros(1), np.eye(1), np.zeros(1), rng_stream(0, 0))


def test_i_step_pg_means():
    X = np.ones((50_000, 1))
    for s, target in [(1, 0.25), (10, 2.5)]:
        blk = logistic_i_step(np.zeros(1), X, np.full(50_000, s), rng_stream(s, 0))
        assert abs(blk.omega.mean() - target) < 3 * mc_se(blk.omega)
        assert np.all(blk.omega > 0)
        assert blk.xtox == pytest.approx(np.array([[blk.omega.sum()]]))


def test_i_step_cancel_and_nonfinite():
    X = np.ones((1000, 2))
    assert logistic_i_step(np.zeros(2), X, np.ones(1000, dtype=int), rng_stream(0, 0), cancelled=lambda: True) is None
    with pytest.raises(DomainError):
        logistic_i_step(np.array([np.nan, 0.0]), X, np.ones(1000, dtype=int), rng_stream(0, 0))


def test_i_step_chunked_equals_unchunked():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((700, 3))
    s = rng.integers(1, 5, 700)
    beta = np.array([0.5, -1.0, 2.0])
    a = logistic_i_step(beta, X, s, rng_stream(2, 0))
    b = logistic_i_step(beta, X, s, rng_stream(2, 0), cancelled=lambda: False)
    assert np.array_equal(a.omega, b.omega)


@pytest.mark.parametrize("beta,omega,c,expected", [
    (np.zeros(1), np.ones(5), 10, 10.0),
    (np.ones(2), np.zeros(0), 3, 2.0),
    (np.zeros(1), np.array([2.0]), 1, 2.5),
])
def test_drift_examples(beta, omega, c, expected):
    assert logistic_drift(beta, omega, c) == pytest.approx(expected)


def test_drift_domain():
    with pytest.raises(DomainError):
        logistic_drift(np.zeros(1), np.array([1.0, -1.0]), 2)


def test_predict_prob_examples():
    assert predict_prob(np.zeros((3, 4)), np.ones(4)) == pytest.approx(0.5)
    assert predict_prob(np.array([[800.0]]), [1.0])[0] == pytest.approx(1.0, abs=1e-12)
    assert predict_prob(np.array([[-800.0]]), [1.0])[0] >= 0.0
    beta = np.array([-2.0, 2.0] * 5)
    assert predict_prob(beta[None, :], np.ones(10))[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        predict_prob(np.zeros((2, 3)), np.ones(2))


def test_data_and_prior_validation():
    with pytest.raises(ValueError):
        LogisticData([3], [2], [[1.0]])
    with pytest.raises(ValueError):
        LogisticData([0], [0], [[1.0]])
    with pytest.raises(ValueError):
        LogisticData([0, 1], [1], [[1.0]])
    with pytest.raises(np.linalg.LinAlgError):
        LogisticPrior(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    data = LogisticData([1, 0], [1, 1], np.eye(2))
    with pytest.raises(ValueError):
        LogisticKernel(data, [np.array([0])])
    with pytest.raises(ValueError):
        LogisticKernel(data, [np.array([0, 1])], predict_at=np.ones(3))


def _small_problem(seed=0, n=50):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    y = rng.binomial(1, expit(X @ np.array([-0.5, 1.0])))
    return LogisticData(y, np.ones(n, dtype=int), X)


def _quadrature_mean(data, prior, half_width=6.0, size=401):
    # Laplace approximation sets the grid, then a plain Riemann sum
    from scipy.optimize import minimize

    prec = prior.precision

    def nlp(b):
        eta = data.X @ b
        return -(data.y @ log_expit(eta) + (data.s - data.y) @ log_expit(-eta)) + 0.5 * b @ prec @ b

    mode = minimize(nlp, np.zeros(2), method="BFGS").x
    w = expit(data.X @ mode) * (1 - expit(data.X @ mode))
    sd = np.sqrt(np.diag(np.linalg.inv((data.X * w[:, None]).T @ data.X + prec)))
    g0 = np.linspace(mode[0] - half_width * sd[0], mode[0] + half_width * sd[0], size)
    g1 = np.linspace(mode[1] - half_width * sd[1], mode[1] + half_width * sd[1], size)
    B0, B1 = np.meshgrid(g0, g1, indexing="ij")
    pts = np.column_stack([B0.ravel(), B1.ravel()])
    eta = pts @ data.X.T
    loglik = (log_expit(eta) * data.y).sum(1) + (log_expit(-eta) * (data.s - data.y)).sum(1)
    logpost = loglik - 0.5 * np.einsum("ij,jk,ik->i", pts, prec, pts)
    wts = np.exp(logpost - logpost.max())
    return (pts * wts[:, None]).sum(0) / wts.sum()


@pytest.mark.slow
def test_parent_stationarity_vs_quadrature():
    data = _small_problem()
    kern = LogisticKernel(data, [np.arange(0, 50, 2), np.arange(1, 50, 2)])
    draws, _ = run_chain(kern, SelectionPolicy(k=2, r=1.0), 100_000, 7)
    target = _quadrature_mean(data, kern.prior)
    x = draws.values[1000:]
    for j in range(2):
        assert abs(x[:, j].mean() - target[j]) < 3 * obm_mcse(x[:, j])


@pytest.mark.slow
def test_adda_long_run_mean_matches_parent():
    data = _small_problem(seed=1)
    parts = [np.arange(i, 50, 5) for i in range(5)]
    kern = LogisticKernel(data, parts)
    par, _ = run_chain(kern, SelectionPolicy(k=5, r=1.0), 50_000, 1)
    ad, _ = run_chain(kern, SelectionPolicy(k=5, r=0.2, epsilon=0.1), 50_000, 2)
    for j in range(2):
        a, b = ad.values[1000:, j], par.values[1000:, j]
        se = np.hypot(obm_mcse(a), obm_mcse(b))
        assert abs(a.mean() - b.mean()) < 4 * se


def test_kernel_matches_parent_reference():
    data = _small_problem(seed=2, n=30)
    kern = LogisticKernel(data, [np.arange(0, 30, 3), np.arange(1, 30, 3), np.arange(2, 30, 3)],
                          predict_at=np.ones(2))
    draws, _ = run_chain(kern, SelectionPolicy(k=3, r=0.4, epsilon=1.0), 50, 3)
    assert draws.names == ["beta1", "beta2", "prob"]
    assert np.array_equal(draws.values, parent_da(kern, 50, 3))
    assert np.allclose(draws.values[:, 2], predict_prob(draws.values[:, :2], np.ones(2)))

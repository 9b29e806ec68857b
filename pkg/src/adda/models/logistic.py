"""Polya-Gamma data augmentation for Bayesian binomial logistic regression.

Model: ``y_i ~ Binomial(s_i, expit(x_i^T beta))`` with ``beta ~ N(mu, Sigma)``.
Given ``omega_i ~ PG(s_i, |x_i^T beta|)`` the conditional of ``beta`` is
Gaussian with precision ``X^T Omega X + Sigma^{-1}`` and linear term
``X^T kappa + Sigma^{-1} mu`` where ``kappa_i = y_i - s_i / 2``.

Workers own disjoint row subsets.  A worker's block carries its ``omega``
values and the partial sum ``sum_j omega_j x_j x_j^T`` so the manager's P step
costs O(k p^2 + p^3) no matter which blocks are stale.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit

from ..distributions import cholesky, sample_mvn_precision, sample_polya_gamma
from ..engine import DAKernel
from ..errors import DomainError
from ._util import check_partition

# rows per preemption poll in the I step
CHUNK = 256


@dataclass
class LogisticData:
    """Binomial responses ``y`` out of ``s`` trials with design ``X``."""

    y: np.ndarray
    s: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=np.int64).ravel()
        self.s = np.asarray(self.s, dtype=np.int64).ravel()
        n = self.X.shape[0]
        if self.y.size != n or self.s.size != n:
            raise ValueError("y, s and X must have the same number of rows")
        if np.any(self.s < 1):
            raise ValueError("trial counts s must be >= 1")
        if np.any(self.y < 0) or np.any(self.y > self.s):
            raise ValueError("responses must satisfy 0 <= y <= s")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass
class LogisticPrior:
    mu_beta: np.ndarray
    Sigma_beta: np.ndarray

    def __post_init__(self):
        self.mu_beta = np.asarray(self.mu_beta, dtype=float).ravel()
        self.Sigma_beta = np.atleast_2d(np.asarray(self.Sigma_beta, dtype=float))
        p = self.mu_beta.size
        if self.Sigma_beta.shape != (p, p):
            raise ValueError("Sigma_beta must be p x p")
        cholesky(self.Sigma_beta, "Sigma_beta")

    @classmethod
    def default(cls, p, scale=100.0):
        """Diffuse ``N(0, scale I)`` prior."""
        return cls(np.zeros(p), scale * np.eye(p))

    @property
    def precision(self):
        return linalg.cho_solve((cholesky(self.Sigma_beta, "Sigma_beta"), True), np.eye(self.mu_beta.size))


@dataclass
class OmegaBlock:
    """Polya-Gamma draws for one worker's rows and their weighted Gram matrix."""

    omega: np.ndarray
    xtox: np.ndarray


def logistic_i_step(beta, X, s, rng, cancelled=None):
    """Draw ``omega_j ~ PG(s_j, |x_j^T beta|)`` for the rows of one worker.

    Returns ``None`` if ``cancelled()`` becomes true between chunks of rows.
    """
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise DomainError("beta must be finite")
    c = np.abs(X @ beta)
    if cancelled is None:
        omega = sample_polya_gamma(s, c, rng)
    else:
        omega = np.empty(c.size)
        for lo in range(0, c.size, CHUNK):
            if cancelled():
                return None
            omega[lo:lo + CHUNK] = sample_polya_gamma(s[lo:lo + CHUNK], c[lo:lo + CHUNK], rng)
    omega = np.atleast_1d(omega)
    return OmegaBlock(omega, (X * omega[:, None]).T @ X)


def logistic_p_step(blocks, xtk, prior_precision, prior_linear, rng):
    """Draw ``beta ~ N(m, V)`` with ``V^{-1} = X^T Omega X + Sigma^{-1}``.

    Parameters
    ----------
    blocks : sequence of OmegaBlock
        Current block of every worker; their ``xtox`` sum to ``X^T Omega X``.
    xtk : (p,) ndarray
        ``X^T kappa`` with ``kappa_i = y_i - s_i / 2``.
    prior_precision, prior_linear : ndarray
        ``Sigma^{-1}`` and ``Sigma^{-1} mu``.

    Returns
    -------
    beta, mean : ndarray
    """
    xtox = None
    for b in blocks:
        if np.any(b.omega <= 0):
            raise DomainError("Polya-Gamma weights must be positive")
        xtox = b.xtox if xtox is None else xtox + b.xtox
    return sample_mvn_precision(xtk + prior_linear, xtox + prior_precision, rng)


def logistic_drift(beta, omega, c):
    """``beta^T beta + sum_j (omega_j^{-c} + omega_j)``."""
    beta = np.asarray(beta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("omega must be positive")
    return float(beta @ beta + np.sum(omega ** (-float(c)) + omega))


def predict_prob(beta_draws, x):
    """Per-draw ``P(y = 1 | x) = expit(x^T beta)`` for a draw matrix or array of betas."""
    values = getattr(beta_draws, "values", beta_draws)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if values.shape[1] != x.size:
        raise ValueError(f"draws have {values.shape[1]} columns but x has length {x.size}")
    return expit(values @ x)


class LogisticKernel(DAKernel):
    """Row-partitioned Polya-Gamma kernel.

    Parameters
    ----------
    data : LogisticData
    partition : sequence of int arrays
        Disjoint row index sets covering ``range(n)``, one per worker.
    prior : LogisticPrior, optional
        Defaults to ``N(0, 100 I)``.
    predict_at : array_like, optional
        Covariate vector ``x``; if given, ``P(y = 1 | x)`` is recorded as an
        extra functional named ``prob``.
    """

    model = "logistic"

    def __init__(self, data, partition, prior=None, predict_at=None):
        self.data = data
        self.predict_at = None if predict_at is None else np.asarray(predict_at, dtype=float).ravel()
        if self.predict_at is not None and self.predict_at.size != data.p:
            raise ValueError("predict_at must have length p")
        self.parts = check_partition(partition, data.n)
        self.prior = prior if prior is not None else LogisticPrior.default(data.p)
        if self.prior.mu_beta.size != data.p:
            raise ValueError("prior dimension does not match X")
        self._X = [np.ascontiguousarray(data.X[idx]) for idx in self.parts]
        self._s = [np.ascontiguousarray(data.s[idx]) for idx in self.parts]
        kappa = data.y - 0.5 * data.s
        self._xtk = data.X.T @ kappa
        self._prec = self.prior.precision
        self._prior_lin = self._prec @ self.prior.mu_beta
        self._c = int(data.s.max())

    @property
    def k(self):
        return len(self.parts)

    def block_size(self, worker):
        return int(self._s[worker].sum())

    def init_state(self):
        # omega at the PG(s, 0) mean
        beta = np.zeros(self.data.p)
        blocks = []
        for X, s in zip(self._X, self._s):
            omega = s / 4.0
            blocks.append(OmegaBlock(omega, (X * omega[:, None]).T @ X))
        return beta, blocks

    def i_step(self, worker, theta, rng, cancelled=None):
        return logistic_i_step(theta, self._X[worker], self._s[worker], rng, cancelled)

    def p_step(self, blocks, rng):
        beta, _ = logistic_p_step(blocks, self._xtk, self._prec, self._prior_lin, rng)
        return beta

    def functional_names(self):
        names = [f"beta{j + 1}" for j in range(self.data.p)]
        return names if self.predict_at is None else names + ["prob"]

    def functionals(self, theta):
        if self.predict_at is None:
            return theta
        return np.append(theta, expit(theta @ self.predict_at))

    def drift(self, theta, blocks):
        return logistic_drift(theta, np.concatenate([b.omega for b in blocks]), self._c)


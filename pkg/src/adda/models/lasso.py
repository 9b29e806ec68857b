"""Bayesian lasso data augmentation.

Model: ``y ~ N(X beta, sigma^2 I)``, ``beta_j | tau_j, sigma^2 ~ N(0, sigma^2 tau_j)``,
``tau_j ~ Exponential(lambda^2 / 2)`` and ``sigma^2 ~ InverseGamma(alpha, b)``.

The latent scales ``tau`` are split by coordinate across workers.  Given
``(beta, sigma^2)`` the conditional density of ``tau_j`` is proportional to
``tau^{-1/2} exp(-lambda^2 tau / 2 - beta_j^2 / (2 sigma^2 tau))``, so
``1 / tau_j`` is inverse-Gaussian with mean ``|lambda| sigma / |beta_j|`` and
shape ``lambda^2``.  The P step draws ``sigma^2`` with ``beta`` integrated out
and then ``beta`` given ``sigma^2``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..distributions import cholesky, sample_inverse_gaussian, sample_scaled_inv_chisq
from ..engine import DAKernel
from ..errors import DomainError
from ._util import check_partition

# floor on |beta_j| in the inverse-Gaussian mean
BETA_FLOOR = 1e-12
# coordinates per preemption poll
CHUNK = 64


@dataclass
class LassoData:
    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.y.size != self.X.shape[0]:
            raise ValueError("y and X must have the same number of rows")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class LassoHyper:
    """Inverse-gamma shape ``alpha`` and rate ``b`` for sigma^2; shrinkage ``lam``."""

    alpha: float = 1.0
    b: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.b > 0):
            raise ValueError("alpha and b must be positive")
        if self.lam == 0 or not math.isfinite(self.lam):
            raise ValueError("lambda must be finite and nonzero")


@dataclass
class LassoTheta:
    beta: np.ndarray
    sigma2: float


def lasso_i_step(beta, sigma2, lam, rng, cancelled=None):
    """Draw ``tau_j = 1 / IG(|lam| sigma / |beta_j|, lam^2)`` for the given coordinates.

    ``|beta_j|`` is floored at ``BETA_FLOOR``.  Returns ``None`` when
    ``cancelled()`` turns true between chunks.
    """
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    beta = np.asarray(beta, dtype=float)
    mu = abs(lam) * math.sqrt(sigma2) / np.maximum(np.abs(beta), BETA_FLOOR)
    lam2 = lam * lam
    # always chunked so stream consumption does not depend on ``cancelled``
    tau = np.empty(mu.size)
    for lo in range(0, mu.size, CHUNK):
        if cancelled is not None and cancelled():
            return None
        tau[lo:lo + CHUNK] = 1.0 / sample_inverse_gaussian(mu[lo:lo + CHUNK], lam2, rng)
    return tau


def lasso_p_step(tau, xtx, xty, yty, n, hyper, rng):
    """Draw ``(beta, sigma^2)`` given every ``tau``.

    ``sigma^2 ~ InverseGamma(n/2 + alpha, (y^T(I - X A^{-1} X^T) y + 2b) / 2)``
    and ``beta ~ N(A^{-1} X^T y, sigma^2 A^{-1})`` with ``A = X^T X + diag(1/tau)``.

    Returns
    -------
    LassoTheta, mean : ndarray
        The draw and the conditional mean ``A^{-1} X^T y``.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("tau must be positive")
    A = xtx + np.diag(1.0 / tau)
    L = cholesky(A, "X^T X + D_tau^{-1}")
    mean = linalg.cho_solve((L, True), xty)
    quad = yty - xty @ mean
    if quad < 0:
        # y^T (I - X A^{-1} X^T) y >= 0 exactly; allow rounding only
        if quad < -1e-8 * max(yty, 1.0):
            raise DomainError(f"negative residual quadratic form {quad}")
        quad = 0.0
    sigma2 = sample_scaled_inv_chisq(n + 2.0 * hyper.alpha, quad + 2.0 * hyper.b, rng)
    z = rng.standard_normal(mean.size)
    beta = mean + math.sqrt(sigma2) * linalg.solve_triangular(L, z, lower=True, trans="T")
    return LassoTheta(beta, sigma2), mean


def lasso_drift(beta, tau, sigma2, resid_sq, w=1.0, s_exp=0.25):
    """``beta^T D^{-1} beta + sum tau + w ||y - X beta||^2 + sum tau^{-s/2} + sigma^2 + 1/sigma^2``."""
    beta = np.asarray(beta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0) or not sigma2 > 0:
        raise DomainError("tau and sigma2 must be positive")
    if not (w > 0 and 0 < s_exp < 0.5):
        raise DomainError("monitor constants need w > 0 and 0 < s_exp < 1/2")
    return float(
        np.sum(beta * beta / tau) + tau.sum() + w * resid_sq
        + np.sum(tau ** (-0.5 * s_exp)) + sigma2 + 1.0 / sigma2
    )


class LassoKernel(DAKernel):
    """Coordinate-partitioned Bayesian lasso kernel.

    Parameters
    ----------
    data : LassoData
    partition : sequence of int arrays
        Disjoint coordinate index sets covering ``range(p)``.
    hyper : LassoHyper, optional
    w, s_exp : float
        Drift-monitor constants.
    """

    model = "lasso"

    def __init__(self, data, partition, hyper=None, w=1.0, s_exp=0.25):
        self.data = data
        self.parts = check_partition(partition, data.p)
        self.hyper = hyper if hyper is not None else LassoHyper()
        self.w = w
        self.s_exp = s_exp
        self._xtx = data.X.T @ data.X
        self._xty = data.X.T @ data.y
        self._yty = float(data.y @ data.y)

    @property
    def k(self):
        return len(self.parts)

    def block_size(self, worker):
        return self.parts[worker].size

    def init_state(self):
        theta = LassoTheta(np.zeros(self.data.p), 1.0)
        return theta, [np.ones(idx.size) for idx in self.parts]

    def i_step(self, worker, theta, rng, cancelled=None):
        idx = self.parts[worker]
        return lasso_i_step(theta.beta[idx], theta.sigma2, self.hyper.lam, rng, cancelled)

    def _tau(self, blocks):
        tau = np.empty(self.data.p)
        for idx, b in zip(self.parts, blocks):
            tau[idx] = b
        return tau

    def p_step(self, blocks, rng):
        theta, _ = lasso_p_step(
            self._tau(blocks), self._xtx, self._xty, self._yty, self.data.n, self.hyper, rng
        )
        return theta

    def functional_names(self):
        return [f"beta{j + 1}" for j in range(self.data.p)] + ["sigma2"]

    def functionals(self, theta):
        return np.append(theta.beta, theta.sigma2)

    def drift(self, theta, blocks):
        r = self.data.y - self.data.X @ theta.beta
        return lasso_drift(theta.beta, self._tau(blocks), theta.sigma2, float(r @ r), self.w, self.s_exp)

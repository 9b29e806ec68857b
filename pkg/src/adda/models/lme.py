"""Marginal data augmentation for the linear mixed-effects model.

Model, for subjects ``i = 1..m``::

    y_i = X_i beta + Z_i b_i + e_i,   b_i ~ N(0, Sigma),   e_i ~ N(0, sigma^2 I)

The sampler works with the working parameter ``Gamma`` (nonsingular, q x q)
and modified random effects ``d_i = Gamma^{-1} b_i ~ N(0, Sigma_tilde)`` so that
``Sigma = Gamma Sigma_tilde Gamma^T``.  Writing ``gamma = vec(Gamma)`` (column
major) and ``alpha = (beta, gamma)``, the response is linear in ``alpha`` with
design rows ``[X_i, d_i^T kron Z_i] = [X_i, d_i1 Z_i, ..., d_iq Z_i]``.

Priors: ``sigma^2 ~ M / chi2_a``, ``alpha | sigma^2 ~ N(0, sigma^2 V_alpha^{-1})``
and ``Sigma_tilde ~ IW(W, s)``.

Workers own disjoint subject sets and ship only sufficient statistics
``(S_dd, S_xx, S_xy, y^T y)``.  These are assembled from per-subject moments
(``Z^T Z``, ``X^T Z``, ``Z^T y``) so neither the I step nor the statistics
ever touch an ``n_i``-row matrix.

With ``fix_gamma=True`` the working parameter is pinned at ``Gamma = I``:
then ``alpha = beta``, ``V_alpha`` is p x p and the regression is of
``y - Z d`` on ``X``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..distributions import cholesky, sample_scaled_inv_chisq, sample_wishart
from ..engine import DAKernel
from ..errors import ChainError, DomainError
from ._util import check_partition

# subjects per preemption poll
CHUNK = 64
DET_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# data, prior, state


@dataclass
class Subject:
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray


class LmeData:
    """Per-subject response vectors and design matrices."""

    def __init__(self, subjects):
        self.subjects = []
        for j, (y, X, Z) in enumerate(subjects):
            y = np.asarray(y, dtype=float).ravel()
            X = np.atleast_2d(np.asarray(X, dtype=float))
            Z = np.atleast_2d(np.asarray(Z, dtype=float))
            if X.shape[0] != y.size or Z.shape[0] != y.size:
                raise ValueError(f"subject {j}: y, X and Z row counts differ")
            self.subjects.append(Subject(y, X, Z))
        if not self.subjects:
            raise ValueError("need at least one subject")
        self.p = self.subjects[0].X.shape[1]
        self.q = self.subjects[0].Z.shape[1]
        for j, s in enumerate(self.subjects):
            if s.X.shape[1] != self.p or s.Z.shape[1] != self.q:
                raise ValueError(f"subject {j}: inconsistent column counts")

    @classmethod
    def from_long(cls, subject_id, y, X, Z):
        """Group long-format rows by subject id (in order of first appearance)."""
        subject_id = np.asarray(subject_id)
        y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float)
        Z = np.asarray(Z, dtype=float)
        _, first, inverse = np.unique(subject_id, return_index=True, return_inverse=True)
        order = np.argsort(first)
        subjects = []
        for g in order:
            rows = np.flatnonzero(inverse == g)
            subjects.append((y[rows], X[rows], Z[rows]))
        return cls(subjects)

    @property
    def m(self):
        return len(self.subjects)

    @property
    def n(self):
        return sum(s.y.size for s in self.subjects)

    @property
    def X(self):
        return np.vstack([s.X for s in self.subjects])

    @property
    def Z(self):
        return np.vstack([s.Z for s in self.subjects])

    @property
    def y(self):
        return np.concatenate([s.y for s in self.subjects])


@dataclass
class LmePrior:
    """``sigma^2 ~ M / chi2_a``, ``alpha | sigma^2 ~ N(0, sigma^2 V_alpha^{-1})``, ``Sigma_tilde ~ IW(W, s)``."""

    M: float
    a: float
    V_alpha: np.ndarray
    W: np.ndarray
    s: float

    def __post_init__(self):
        self.V_alpha = np.atleast_2d(np.asarray(self.V_alpha, dtype=float))
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        q = self.W.shape[0]
        if not (self.M > 0 and self.a > 0):
            raise ValueError("M and a must be positive")
        if not self.s > q + 1:
            raise ValueError(f"s must exceed q + 1 = {q + 1}")
        cholesky(self.V_alpha, "V_alpha")
        cholesky(self.W, "W")

    @classmethod
    def default(cls, p, q, fix_gamma=False):
        dim = p if fix_gamma else p + q * q
        return cls(M=1.0, a=1.0, V_alpha=np.eye(dim), W=np.eye(q), s=q + 2.0)


@dataclass
class LmeTheta:
    """Parameter state; ``Gamma`` and ``Sigma`` are derived from ``alpha`` and ``Sigma_tilde``."""

    alpha: np.ndarray
    Sigma_tilde: np.ndarray
    sigma2: float
    p: int
    q: int
    fix_gamma: bool = False

    @property
    def beta(self):
        return self.alpha[: self.p]

    @property
    def Gamma(self):
        if self.fix_gamma:
            return np.eye(self.q)
        return self.alpha[self.p:].reshape(self.q, self.q, order="F")

    @property
    def Sigma(self):
        G = self.Gamma
        S = G @ self.Sigma_tilde @ G.T
        return 0.5 * (S + S.T)


@dataclass
class LmeStatsBlock:
    """One worker's sufficient statistics, plus two drift-monitor scalars.

    ``resid_zb_sq`` is ``sum_j ||y_j - Z_j b_j||^2`` and ``b_sq`` is
    ``sum_j b_j^T b_j`` with ``b_j = Gamma d_j`` at the snapshot used.
    """

    S_dd: np.ndarray
    S_xx: np.ndarray
    S_xy: np.ndarray
    yty: float
    resid_zb_sq: float
    b_sq: float


# ---------------------------------------------------------------------------
# per-worker moments


class SubjectMoments:
    """Stacked per-subject cross products for a set of subjects."""

    def __init__(self, subjects):
        self.ZtZ = np.stack([s.Z.T @ s.Z for s in subjects])
        self.XtZ = np.stack([s.X.T @ s.Z for s in subjects])
        self.Zty = np.stack([s.Z.T @ s.y for s in subjects])
        self.yty_each = np.array([s.y @ s.y for s in subjects])
        self.XtX = sum(s.X.T @ s.X for s in subjects)
        self.Xty = sum(s.X.T @ s.y for s in subjects)
        self.yty = float(self.yty_each.sum())

    def __len__(self):
        return self.ZtZ.shape[0]


def lme_conditional(theta, y, X, Z):
    """Mean and covariance of ``d | theta, y`` for one subject via the q x q precision form.

    ``V_d = (Gamma^T Z^T Z Gamma / sigma^2 + Sigma_tilde^{-1})^{-1}`` and
    ``m_d = V_d Gamma^T Z^T (y - X beta) / sigma^2``.
    """
    G = np.asarray(Z, dtype=float) @ theta.Gamma
    St_inv = _spd_inverse(theta.Sigma_tilde, "Sigma_tilde")
    P = G.T @ G / theta.sigma2 + St_inv
    L = cholesky(P, "d precision")
    V = linalg.cho_solve((L, True), np.eye(theta.q))
    m = V @ (G.T @ (np.asarray(y, dtype=float) - np.asarray(X, dtype=float) @ theta.beta)) / theta.sigma2
    return m, 0.5 * (V + V.T)


def _spd_inverse(a, what):
    L = cholesky(a, what)
    inv = linalg.cho_solve((L, True), np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def lme_draw_d(theta, mom, rng, cancelled=None):
    """Draw ``d_j ~ N(m_d, V_d)`` for every subject in ``mom``; ``None`` if cancelled."""
    if not theta.sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    q = theta.q
    G = theta.Gamma
    St_inv = _spd_inverse(theta.Sigma_tilde, "Sigma_tilde")
    beta = theta.beta
    B = len(mom)
    d = np.empty((B, q))
    for lo in range(0, B, CHUNK):
        if cancelled is not None and cancelled():
            return None
        hi = min(lo + CHUNK, B)
        GtG = np.einsum("ai,bac,cj->bij", G, mom.ZtZ[lo:hi], G)
        P = GtG / theta.sigma2 + St_inv
        resid = mom.Zty[lo:hi] - np.einsum("bpq,p->bq", mom.XtZ[lo:hi], beta)
        h = resid @ G / theta.sigma2
        try:
            L = np.linalg.cholesky(P)
        except np.linalg.LinAlgError as exc:
            raise DomainError("d precision is not positive definite") from exc
        mean = np.linalg.solve(P, h[..., None])[..., 0]
        z = rng.standard_normal((hi - lo, q))
        d[lo:hi] = mean + np.linalg.solve(np.swapaxes(L, 1, 2), z[..., None])[..., 0]
    return d


def lme_stats(d, theta, mom):
    """Sufficient statistics of one worker's subjects given their ``d`` draws."""
    p, q = theta.p, theta.q
    S_dd = d.T @ d
    b = d @ theta.Gamma.T
    Zb = np.einsum("bij,bj->bi", mom.ZtZ, b)
    resid_zb_sq = float(mom.yty - 2.0 * np.sum(b * mom.Zty) + np.sum(b * Zb))
    b_sq = float(np.sum(b * b))
    if theta.fix_gamma:
        XtZb = np.einsum("bpq,bq->p", mom.XtZ, d)
        return LmeStatsBlock(S_dd, mom.XtX, mom.Xty - XtZb, resid_zb_sq, resid_zb_sq, b_sq)
    qq = q * q
    S_xx = np.empty((p + qq, p + qq))
    S_xx[:p, :p] = mom.XtX
    XG = np.einsum("bc,bpa->pca", d, mom.XtZ).reshape(p, qq)
    S_xx[:p, p:] = XG
    S_xx[p:, :p] = XG.T
    S_xx[p:, p:] = np.einsum("bc,be,baf->caef", d, d, mom.ZtZ).reshape(qq, qq)
    S_xy = np.concatenate([mom.Xty, np.einsum("bc,ba->ca", d, mom.Zty).reshape(qq)])
    return LmeStatsBlock(S_dd, S_xx, S_xy, mom.yty, resid_zb_sq, b_sq)


def lme_i_step(theta, mom, rng, cancelled=None):
    """Draw the worker's ``d`` vectors and return their :class:`LmeStatsBlock`."""
    d = lme_draw_d(theta, mom, rng, cancelled)
    if d is None:
        return None
    return lme_stats(d, theta, mom)


def lme_p_step(blocks, m, n, prior, p, q, rng, fix_gamma=False):
    """Draw ``(Sigma_tilde, sigma^2, alpha)`` from summed sufficient statistics.

    In order: ``Sigma_tilde^{-1} ~ Wishart_{m+s-q}(S_DD^{-1})`` with
    ``S_DD = sum S_dd + W``; ``sigma^2 = (||y - y_hat||^2 + M) / chi2_{n+a-p_tilde}``;
    ``alpha ~ N(alpha_hat, sigma^2 (S_XX + V_alpha)^{-1})`` with
    ``alpha_hat = (S_XX + V_alpha)^{-1} S_XY``.

    Returns
    -------
    LmeTheta, dict
        The draw and the intermediate quantities ``alpha_hat``, ``S_DD``
        and ``rss``.
    """
    p_tilde = p if fix_gamma else p + q * q
    df_sigma = n + prior.a - p_tilde
    if not df_sigma > 0:
        raise DomainError(f"n + a - p_tilde = {df_sigma} must be positive")
    S_DD = prior.W + sum(b.S_dd for b in blocks)
    S_XX = sum(b.S_xx for b in blocks)
    S_XY = sum(b.S_xy for b in blocks)
    yty = sum(b.yty for b in blocks)

    prec = sample_wishart(m + prior.s - q, _spd_inverse(S_DD, "S_DD"), rng)
    Sigma_tilde = _spd_inverse(prec, "Sigma_tilde^{-1}")

    A = S_XX + prior.V_alpha
    L = cholesky(A, "S_XX + V_alpha")
    alpha_hat = linalg.cho_solve((L, True), S_XY)
    rss = yty - 2.0 * alpha_hat @ S_XY + alpha_hat @ S_XX @ alpha_hat
    if rss < 0:
        if rss < -1e-8 * max(yty, 1.0):
            raise DomainError(f"negative residual sum of squares {rss}")
        rss = 0.0
    sigma2 = sample_scaled_inv_chisq(df_sigma, rss + prior.M, rng)
    z = rng.standard_normal(p_tilde)
    alpha = alpha_hat + math.sqrt(sigma2) * linalg.solve_triangular(L, z, lower=True, trans="T")
    theta = LmeTheta(alpha, Sigma_tilde, sigma2, p, q, fix_gamma)
    if not fix_gamma and abs(np.linalg.det(theta.Gamma)) < DET_FLOOR:
        raise ChainError("drawn Gamma is numerically singular")
    return theta, {"alpha_hat": alpha_hat, "S_DD": S_DD, "rss": rss}


def lme_drift(resid_zb_sq, resid_xb_sq, b_sq, sigma2, Sigma, c=(1.0, 1.0, 1.0, 1.0)):
    """``||y-Zb||^2 + 1/s2 + tr Sigma^{-1} + c1 s2 + c2 ||y-X beta||^2/s2 + c3 sum b^T b + c4 tr Sigma``."""
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    c1, c2, c3, c4 = c
    return float(
        resid_zb_sq + 1.0 / sigma2 + np.trace(_spd_inverse(Sigma, "Sigma"))
        + c1 * sigma2 + c2 * resid_xb_sq / sigma2 + c3 * b_sq + c4 * np.trace(Sigma)
    )


# ---------------------------------------------------------------------------
# Assumption checks for the fixed-Gamma chain


@dataclass
class AssumptionReport:
    a: bool
    b: bool
    c: bool
    min_eigenvalue: float

    def as_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c, "min_eigenvalue": self.min_eigenvalue}


def check_assumption1(data, prior, epsilon):
    """Check the sufficient conditions for geometric ergodicity of the fixed-Gamma chain.

    (a) every ``Z_i^T Z_i`` and ``X^T X`` positive definite; (b)
    ``s - q - 1 > (1 - eps) m / eps``; (c) ``(eps I - H) - kappa (I - H)``
    positive definite, with ``H = X (V_beta + X^T X)^{-1} X^T`` and
    ``kappa = (p + m q) / (n + a - p - 2)``.  ``V_beta`` is the leading
    p x p block of ``prior.V_alpha``.

    The n x n matrix in (c) equals ``(eps - kappa) I - (1 - kappa) H``; its
    eigenvalues are ``eps - kappa`` on the null space of ``H`` and
    ``eps - kappa - (1 - kappa) h_j`` for the p generalized eigenvalues
    ``h_j`` of ``X^T X`` relative to ``V_beta + X^T X``.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    p, q, m, n = data.p, data.q, data.m, data.n

    def spd(a):
        try:
            np.linalg.cholesky(a)
            return True
        except np.linalg.LinAlgError:
            return False

    X = data.X
    XtX = X.T @ X
    ok_a = spd(XtX) and all(spd(s.Z.T @ s.Z) for s in data.subjects)
    ok_b = prior.s - q - 1 > (1 - epsilon) * m / epsilon

    denom = n + prior.a - p - 2
    if denom <= 0:
        return AssumptionReport(ok_a, ok_b, False, -math.inf)
    kappa = (p + m * q) / denom
    V_beta = prior.V_alpha[:p, :p]
    h = linalg.eigh(XtX, V_beta + XtX, eigvals_only=True)
    eig = list(epsilon - kappa - (1 - kappa) * h)
    if n > np.linalg.matrix_rank(X):
        eig.append(epsilon - kappa)
    lam_min = float(min(eig))
    return AssumptionReport(ok_a, bool(ok_b), lam_min > 0, lam_min)


# ---------------------------------------------------------------------------
# kernel


def vech_names(q, prefix="Sigma"):
    return [f"{prefix}{i + 1}{j + 1}" for i in range(q) for j in range(i + 1)]


class LmeKernel(DAKernel):
    """Subject-partitioned marginal DA kernel.

    Parameters
    ----------
    data : LmeData
    partition : sequence of int arrays
        Disjoint subject index sets covering ``range(m)``.
    prior : LmePrior, optional
    fix_gamma : bool
        Pin ``Gamma = I``.
    drift_c : tuple of 4 floats
        Drift-monitor constants ``c1..c4``.
    """

    model = "lme"

    def __init__(self, data, partition, prior=None, fix_gamma=False, drift_c=(1.0, 1.0, 1.0, 1.0)):
        self.data = data
        self.fix_gamma = fix_gamma
        self.parts = check_partition(partition, data.m)
        p, q = data.p, data.q
        self.prior = prior if prior is not None else LmePrior.default(p, q, fix_gamma)
        dim = p if fix_gamma else p + q * q
        if self.prior.V_alpha.shape != (dim, dim) or self.prior.W.shape != (q, q):
            raise ValueError(f"prior needs V_alpha {dim} x {dim} and W {q} x {q}")
        self.drift_c = drift_c
        self._mom = [SubjectMoments([data.subjects[j] for j in idx]) for idx in self.parts]
        self._XtX = sum(mm.XtX for mm in self._mom)
        self._Xty = sum(mm.Xty for mm in self._mom)
        self._yty = sum(mm.yty for mm in self._mom)
        self._sizes = [sum(data.subjects[j].y.size for j in idx) for idx in self.parts]

    @property
    def k(self):
        return len(self.parts)

    def block_size(self, worker):
        return self._sizes[worker]

    def init_state(self):
        p, q = self.data.p, self.data.q
        alpha = np.zeros(p) if self.fix_gamma else np.concatenate([np.zeros(p), np.eye(q).ravel(order="F")])
        theta = LmeTheta(alpha, np.eye(q), 1.0, p, q, self.fix_gamma)
        d0 = [np.zeros((len(mm), q)) for mm in self._mom]
        return theta, [lme_stats(d, theta, mm) for d, mm in zip(d0, self._mom)]

    def i_step(self, worker, theta, rng, cancelled=None):
        return lme_i_step(theta, self._mom[worker], rng, cancelled)

    def p_step(self, blocks, rng):
        theta, _ = lme_p_step(
            blocks, self.data.m, self.data.n, self.prior, self.data.p, self.data.q, rng, self.fix_gamma
        )
        return theta

    def functional_names(self):
        return [f"beta{j + 1}" for j in range(self.data.p)] + vech_names(self.data.q) + ["sigma2"]

    def functionals(self, theta):
        S = theta.Sigma
        rows, cols = np.tril_indices(self.data.q)
        return np.concatenate([theta.beta, S[rows, cols], [theta.sigma2]])

    def drift(self, theta, blocks):
        beta = theta.beta
        resid_xb = max(0.0, self._yty - 2.0 * beta @ self._Xty + beta @ self._XtX @ beta)
        return lme_drift(
            sum(b.resid_zb_sq for b in blocks), resid_xb, sum(b.b_sq for b in blocks),
            theta.sigma2, theta.Sigma, self.drift_c,
        )

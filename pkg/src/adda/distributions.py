"""Random variate generators used by the DA kernels.

Every sampler takes an explicit :class:`numpy.random.Generator`; replaying a
generator with the same state reproduces the draws bit for bit.  One
generator ("stream") is owned by each worker and one by the manager, see
:func:`rng_stream`.

The Polya-Gamma sampler is the exact alternating-series accept/reject method
of Polson, Scott and Windle (2013) for PG(1, z), compiled with numba; PG(b, z)
for integer ``b`` is the sum of ``b`` independent PG(1, z) draws.
"""

import math

import numba
import numpy as np
from scipy import linalg

from .errors import DomainError, FactorizationError

__all__ = [
    "rng_stream",
    "cholesky",
    "sample_polya_gamma",
    "sample_inverse_gaussian",
    "sample_mvn",
    "sample_mvn_precision",
    "sample_wishart",
    "sample_scaled_inv_chisq",
    "polya_gamma_mean",
]


def rng_stream(seed, stream_id):
    """Independent generator for ``(seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    distinct ``stream_id`` values give statistically independent PCG64 streams
    and the same pair always gives the same stream.
    """
    if seed < 0 or stream_id < 0:
        raise ValueError("seed and stream_id must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def cholesky(a, what="matrix"):
    """Lower Cholesky factor; raises :class:`FactorizationError` if ``a`` is not SPD."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be square, got shape {a.shape}")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"{what} is not positive definite") from exc


# ---------------------------------------------------------------------------
# Polya-Gamma

_PG_TRUNC = 0.64
_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@numba.njit(cache=True)
def _log_norm_cdf(x):
    if x > -30.0:
        return math.log(0.5 * math.erfc(-x / _SQRT2))
    # asymptotic Mills-ratio expansion
    return -0.5 * x * x - math.log(-x) - _LOG_SQRT_2PI + math.log1p(-1.0 / (x * x))


@numba.njit(cache=True)
def _pg_coef(n, x):
    # n-th term of the alternating series for the J*(1, z) density
    a = n + 0.5
    if x > _PG_TRUNC:
        return math.pi * a * math.exp(-0.5 * a * a * math.pi * math.pi * x)
    return math.pi * a * (2.0 / (math.pi * x)) ** 1.5 * math.exp(-2.0 * a * a / x)


@numba.njit(cache=True)
def _truncated_ig(z, rng):
    # inverse-Gaussian(1/z, 1) restricted to (0, _PG_TRUNC)
    t = _PG_TRUNC
    if z < 1.0 / t:
        while True:
            while True:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            x = 1.0 + e1 * t
            x = t / (x * x)
            if rng.random() <= math.exp(-0.5 * z * z * x):
                return x
    mu = 1.0 / z
    while True:
        y = rng.standard_normal()
        muy = mu * y * y
        x = mu + 0.5 * mu * muy - 0.5 * mu * math.sqrt(4.0 * muy + muy * muy)
        if rng.random() > mu / (mu + x):
            x = mu * mu / x
        if x < t:
            return x


@numba.njit(cache=True)
def _pg1_ratio(z):
    # mixing weight p / (p + q) of the two proposal pieces for tilt z = c / 2
    t = _PG_TRUNC
    K = math.pi * math.pi / 8.0 + 0.5 * z * z
    p = math.pi / (2.0 * K) * math.exp(-K * t)
    # q = 2 exp(-z) * IGcdf(t; 1/z, 1), assembled in log space
    rt = math.sqrt(t)
    q = 2.0 * math.exp(-z + _log_norm_cdf((t * z - 1.0) / rt))
    q += 2.0 * math.exp(z + _log_norm_cdf(-(t * z + 1.0) / rt))
    return p / (p + q)


@numba.njit(cache=True)
def _pg1(z, K, ratio, rng):
    """One PG(1, 2z) draw given the precomputed proposal constants."""
    while True:
        if rng.random() < ratio:
            x = _PG_TRUNC + rng.standard_exponential() / K
        else:
            x = _truncated_ig(z, rng)
        s = _pg_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _pg_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _pg_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True, nogil=True)
def _pg_fill(b, c, rng, out):
    for i in range(c.shape[0]):
        z = 0.5 * c[i]
        K = math.pi * math.pi / 8.0 + 0.5 * z * z
        ratio = _pg1_ratio(z)
        acc = 0.0
        for _ in range(b[i]):
            acc += _pg1(z, K, ratio, rng)
        out[i] = acc
    return out


def sample_polya_gamma(b, c, rng):
    """Exact Polya-Gamma PG(b, c) draws for positive integer ``b``.

    Parameters
    ----------
    b : int or array_like of int
        Shape (number of trials), each >= 1.
    c : float or array_like
        Tilt, each finite and >= 0.  Broadcast against ``b``.
    rng : numpy.random.Generator

    Returns
    -------
    float or ndarray
        A scalar when both inputs are scalars.
    """
    scalar = np.ndim(b) == 0 and np.ndim(c) == 0
    b_arr = np.asarray(b)
    c_arr = np.asarray(c, dtype=float)
    if not np.issubdtype(b_arr.dtype, np.integer):
        if not np.all(np.isfinite(b_arr)) or np.any(b_arr != np.round(b_arr)):
            raise DomainError("Polya-Gamma shape b must be an integer")
    if np.any(b_arr < 1):
        raise DomainError("Polya-Gamma shape b must be >= 1")
    if not np.all(np.isfinite(c_arr)) or np.any(c_arr < 0):
        raise DomainError("Polya-Gamma tilt c must be finite and >= 0")
    b_arr, c_arr = np.broadcast_arrays(b_arr.astype(np.int64), c_arr)
    shape = b_arr.shape
    out = _pg_fill(
        np.ascontiguousarray(b_arr.ravel()),
        np.ascontiguousarray(c_arr.ravel()),
        rng,
        np.empty(b_arr.size),
    )
    if scalar:
        return float(out[0])
    return out.reshape(shape)


def polya_gamma_mean(b, c):
    """E[PG(b, c)] = b tanh(c/2) / (2c), with the c -> 0 limit b/4."""
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-6
    safe = np.where(small, 1.0, c)
    # tanh(c/2)/(2c) = 1/4 - c^2/48 + O(c^4)
    val = np.where(small, 0.25 - c * c / 48.0, np.tanh(0.5 * safe) / (2.0 * safe))
    return np.asarray(b) * val


# ---------------------------------------------------------------------------
# continuous families


def sample_inverse_gaussian(mu, lam, rng):
    """Inverse-Gaussian(mean ``mu``, shape ``lam``) by Michael, Schucany and Haas.

    Vectorised over broadcast ``mu`` and ``lam``.  The smaller root of the
    transformation is evaluated as ``mu**2 / larger_root`` to avoid the
    catastrophic cancellation of the textbook form when ``mu`` is large.
    """
    scalar = np.ndim(mu) == 0 and np.ndim(lam) == 0
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if not (np.all(mu > 0) and np.all(lam > 0)):
        raise DomainError("inverse-Gaussian parameters must be positive")
    mu, lam = np.broadcast_arrays(mu, lam)
    nu = rng.standard_normal(mu.shape)
    y = nu * nu
    muy = mu * y
    big = mu + (mu * muy + mu * np.sqrt(4.0 * lam * muy + muy * muy)) / (2.0 * lam)
    small = mu * mu / big
    u = rng.random(mu.shape)
    x = np.where(u <= mu / (mu + small), small, big)
    if scalar:
        return float(x)
    return x


def sample_mvn(mean, cov, rng):
    """Multivariate normal draw ``mean + L z`` with ``L`` the lower Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
        raise ValueError(
            f"dimension mismatch: mean has length {mean.size}, cov has shape {cov.shape}"
        )
    L = cholesky(cov, "covariance")
    return mean + L @ rng.standard_normal(mean.size)


def sample_mvn_precision(linear, precision, rng, scale=1.0):
    """Draw from N(Q^{-1} h, scale * Q^{-1}) given precision ``Q`` and ``h``.

    Uses one Cholesky factorization of ``Q``; no explicit inverse is formed.

    Returns
    -------
    draw, mean : ndarray
    """
    L = cholesky(precision, "precision")
    mean = linalg.cho_solve((L, True), linear)
    z = rng.standard_normal(mean.size)
    draw = mean + math.sqrt(scale) * linalg.solve_triangular(L, z, lower=True, trans="T")
    return draw, mean


def sample_wishart(df, scale, rng):
    """Wishart(df, scale) draw via the Bartlett decomposition.

    ``W = L A A^T L^T`` with ``L = chol(scale)``, ``A`` lower triangular,
    ``A_ii = sqrt(chi2_{df - i})`` and standard normal strictly-lower entries.
    Mean is ``df * scale``.
    """
    scale = np.asarray(scale, dtype=float)
    q = scale.shape[0]
    if not df > q - 1:
        raise DomainError(f"Wishart degrees of freedom {df} must exceed dim - 1 = {q - 1}")
    L = cholesky(scale, "Wishart scale")
    A = np.zeros((q, q))
    for i in range(q):
        A[i, i] = math.sqrt(rng.chisquare(df - i))
        A[i, :i] = rng.standard_normal(i)
    LA = L @ A
    W = LA @ LA.T
    return 0.5 * (W + W.T)


def sample_scaled_inv_chisq(df, scale, rng):
    """``scale / chi2_df`` draw.

    Inverse-Gamma(shape a, rate b) is ``sample_scaled_inv_chisq(2a, 2b)``.
    """
    if not (df > 0 and scale > 0):
        raise DomainError("scaled inverse chi-square needs df > 0 and scale > 0")
    return scale / rng.chisquare(df)

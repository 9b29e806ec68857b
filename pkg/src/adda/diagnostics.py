"""Accuracy and Monte Carlo standard-error comparisons between two chains.

``Acc(t)`` is one minus the total-variation distance between kernel density
estimates of the first ``t`` draws of each chain, per recorded component and
averaged over components.  ``SE(t)`` is the absolute difference of the
overlapping-batch-means standard errors of the two prefixes, averaged the
same way.
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.ndimage import convolve1d

GRID_SIZE = 401
KERNEL_REACH = 4.0  # bandwidths covered by the discrete Gaussian kernel and grid margin


@dataclass
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray

    def integral(self):
        return float(np.trapezoid(self.values, self.grid))


@dataclass
class CurveReport:
    """Per-component metric values ``values[t_index, component]`` and their row average."""

    t: np.ndarray
    names: list
    values: np.ndarray

    @property
    def average(self):
        return self.values.mean(axis=1)

    def to_frame(self):
        df = pd.DataFrame(self.values, columns=self.names)
        df.insert(0, "t", self.t)
        df["average"] = self.average
        return df

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


AccuracyReport = CurveReport
SEReport = CurveReport


def silverman_bandwidth(samples):
    """``0.9 min(sd, IQR/1.34) t^{-1/5}``, falling back to whichever spread is positive."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("bandwidth needs at least two samples")
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spreads = [v for v in (sd, (q75 - q25) / 1.34) if v > 0]
    if not spreads:
        raise ValueError("constant sample: bandwidth is degenerate")
    return 0.9 * min(spreads) * x.size ** (-0.2)


def make_grid(lo, hi, bandwidth, size=GRID_SIZE):
    """Equally spaced grid over ``[lo - 4h, hi + 4h]``."""
    pad = KERNEL_REACH * bandwidth
    return np.linspace(lo - pad, hi + pad, size)


def binned_kde(samples, grid, bandwidth):
    """Gaussian KDE evaluated on an equally spaced grid by linear binning.

    Each sample's unit mass is split between its two neighbouring grid points
    in proportion to proximity, and the bin weights are convolved with the
    Gaussian kernel sampled at grid spacing out to 4 bandwidths.

    Parameters
    ----------
    samples : array_like, length >= 2
    grid : array_like
        Equally spaced, increasing, and containing every sample.
    bandwidth : float > 0
    """
    x = np.asarray(samples, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float)
    if x.size < 2:
        raise ValueError("binned_kde needs at least two samples")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    G = grid.size
    delta = (grid[-1] - grid[0]) / (G - 1)
    pos = (x - grid[0]) / delta
    if pos.min() < 0 or pos.max() > G - 1:
        raise ValueError("samples fall outside the grid")
    left = np.minimum(np.floor(pos).astype(np.int64), G - 2)
    frac = pos - left
    counts = np.bincount(left, 1.0 - frac, minlength=G) + np.bincount(left + 1, frac, minlength=G)
    reach = min(int(math.ceil(KERNEL_REACH * bandwidth / delta)), G - 1)
    offs = np.arange(-reach, reach + 1) * delta
    kern = np.exp(-0.5 * (offs / bandwidth) ** 2) / (bandwidth * math.sqrt(2.0 * math.pi))
    dens = convolve1d(counts, kern, mode="constant") / x.size
    return DensityEstimate(grid, np.maximum(dens, 0.0))


def tv_distance(p, q):
    """``0.5 * trapz |p - q|`` clamped to [0, 1]; both estimates must share a grid."""
    if p.grid.shape != q.grid.shape or not np.array_equal(p.grid, q.grid):
        raise ValueError("densities are on different grids")
    tv = 0.5 * np.trapezoid(np.abs(p.values - q.values), p.grid)
    return float(min(1.0, max(0.0, tv)))


def accuracy(adda, parent):
    """``1 - TV`` between KDEs of two sample vectors, bandwidth from ``parent``."""
    adda = np.asarray(adda, dtype=float)
    parent = np.asarray(parent, dtype=float)
    h = silverman_bandwidth(parent)
    grid = make_grid(min(adda.min(), parent.min()), max(adda.max(), parent.max()), h)
    return 1.0 - tv_distance(binned_kde(adda, grid, h), binned_kde(parent, grid, h))


def obm_mcse(series):
    """Overlapping-batch-means Monte Carlo standard error of the series mean.

    Batch length ``b = floor(sqrt(t))``; the variance estimate is
    ``t b / ((t - b)(t - b + 1)) * sum_j (Ybar_j - Ybar)^2`` over all
    ``t - b + 1`` windows, and the result is ``sqrt(var / t)``.
    """
    y = np.asarray(series, dtype=float).ravel()
    t = y.size
    if t < 4:
        raise ValueError("obm_mcse needs at least 4 values")
    if np.all(y == y[0]):
        return 0.0
    b = math.isqrt(t)
    csum = np.concatenate([[0.0], np.cumsum(y - y.mean())])
    win = (csum[b:] - csum[:-b]) / b
    var = t * b / ((t - b) * (t - b + 1)) * np.sum(win * win)
    return math.sqrt(var / t)


def _check_pair(adda, parent, t_grid):
    if list(adda.names) != list(parent.names):
        raise ValueError("draw matrices record different components")
    t_grid = np.asarray(t_grid, dtype=np.int64).ravel()
    if t_grid.size == 0:
        raise ValueError("empty t grid")
    if t_grid.min() < 2 or t_grid.max() > min(len(adda), len(parent)):
        raise ValueError(
            f"t grid must lie in [2, {min(len(adda), len(parent))}], got [{t_grid.min()}, {t_grid.max()}]"
        )
    return t_grid


def accuracy_curve(adda, parent, t_grid):
    """``Acc_j(t)`` for every component ``j`` and checkpoint ``t``.

    Parameters
    ----------
    adda, parent : DrawMatrix
        Chains with identical component names.
    t_grid : array_like of int
        Prefix lengths, each within both chain lengths.
    """
    t_grid = _check_pair(adda, parent, t_grid)
    vals = np.empty((t_grid.size, len(adda.names)))
    for i, t in enumerate(t_grid):
        for j in range(vals.shape[1]):
            vals[i, j] = accuracy(adda.values[:t, j], parent.values[:t, j])
    return CurveReport(t_grid, list(adda.names), vals)


def se_curve(adda, parent, t_grid):
    """``|OBM(adda prefix) - OBM(parent prefix)|`` per component and checkpoint."""
    t_grid = _check_pair(adda, parent, t_grid)
    vals = np.empty((t_grid.size, len(adda.names)))
    for i, t in enumerate(t_grid):
        for j in range(vals.shape[1]):
            vals[i, j] = abs(obm_mcse(adda.values[:t, j]) - obm_mcse(parent.values[:t, j]))
    return CurveReport(t_grid, list(adda.names), vals)


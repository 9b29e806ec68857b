"""Simulated benchmark data, ratings-table feature engineering and partitioning."""

import logging

import numpy as np
import pandas as pd
from scipy.special import expit, logit

from .models.lasso import LassoData
from .models.lme import LmeData
from .models.logistic import LogisticData

log = logging.getLogger(__name__)

LME_BETA = np.array([-2.0, 2.0, -2.0, 2.0])
LME_SIGMA = np.array([
    [1.0, -0.56, 0.52],
    [-0.56, 2.0, 0.0025],
    [0.52, 0.0025, 3.0],
])

# genre -> category; action is the baseline category and gets no column
GENRE_CATEGORY = {
    **{g: "action" for g in ("action", "adventure", "fantasy", "horror", "sci-fi", "thriller")},
    **{g: "children" for g in ("animation", "children", "children's")},
    **{g: "drama" for g in ("crime", "documentary", "drama", "film-noir", "musical",
                            "mystery", "romance", "war", "western")},
    "comedy": "comedy",
}
CATEGORY_COLUMNS = ("comedy", "children", "drama")
MOOD_WINDOW = 30


def alternating(length, start=-2.0):
    """``(start, -start, start, ...)`` of the given length."""
    return start * (-1.0) ** np.arange(length)


def partition(n, k, seed):
    """Split ``range(n)`` into ``k`` parts: seeded shuffle, then round-robin.

    Part sizes differ by at most one.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(perm[i::k]) for i in range(k)]


def gen_logistic(n, seed, p=10, s=10):
    """Binomial logistic data with iid N(0, 1) covariates and ``beta = (-2, 2, ...)``.

    Returns
    -------
    LogisticData, beta : ndarray
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    beta = alternating(p)
    X = rng.standard_normal((n, p))
    trials = np.full(n, s, dtype=np.int64)
    y = rng.binomial(trials, expit(X @ beta))
    return LogisticData(y, trials, X), beta


def gen_lasso(n, seed, sigma2=0.01):
    """Sparse regression with ``p = n``: ``floor(0.9 p)`` zeros then ``-2, 2, ...``.

    Returns
    -------
    LassoData, beta : ndarray, sigma2 : float
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p = n
    rng = np.random.default_rng(seed)
    zeros = int(np.floor(0.9 * p))
    beta = np.concatenate([np.zeros(zeros), alternating(p - zeros)])
    X = rng.standard_normal((n, p))
    y = X @ beta + np.sqrt(sigma2) * rng.standard_normal(n)
    return LassoData(y, X), beta, sigma2


def gen_lme(m, seed, n_i=10):
    """Mixed-effects data with Rademacher ``X`` (p=4) and ``Z`` (q=3).

    When ``n_i >= q`` a subject's ``Z`` is redrawn until ``Z^T Z`` is
    nonsingular, so the designs satisfy the positive-definiteness condition
    of :func:`adda.models.lme.check_assumption1`.

    Returns
    -------
    LmeData, truth : dict
        ``truth`` holds ``beta``, ``Sigma`` and ``sigma2``.
    """
    if m < 1 or n_i < 1:
        raise ValueError("m and n_i must be >= 1")
    L = np.linalg.cholesky(LME_SIGMA)
    rng = np.random.default_rng(seed)
    p, q = LME_BETA.size, LME_SIGMA.shape[0]
    subjects = []
    for _ in range(m):
        X = rng.choice([-1.0, 1.0], size=(n_i, p))
        Z = rng.choice([-1.0, 1.0], size=(n_i, q))
        while n_i >= q and np.linalg.matrix_rank(Z) < q:
            Z = rng.choice([-1.0, 1.0], size=(n_i, q))
        b = L @ rng.standard_normal(q)
        y = X @ LME_BETA + Z @ b + rng.standard_normal(n_i)
        subjects.append((y, X, Z))
    truth = {"beta": LME_BETA.copy(), "Sigma": LME_SIGMA.copy(), "sigma2": 1.0}
    return LmeData(subjects), truth


def _categories(genres):
    cats = {GENRE_CATEGORY[g] for g in str(genres).lower().split("|") if g in GENRE_CATEGORY}
    share = 1.0 / len(cats) if cats else 0.0
    return [share if c in cats else 0.0 for c in CATEGORY_COLUMNS]


def movielens_features(ratings):
    """Design table from a ratings table.

    Parameters
    ----------
    ratings : pandas.DataFrame
        Columns ``user_id, movie_id, rating, timestamp, genres`` with genres
        pipe separated.  Rows with a missing field or a non-numeric rating or
        timestamp are dropped.

    Returns
    -------
    features : pandas.DataFrame
        One row per kept rating, in input order: ids, ``timestamp``,
        ``rating``, ``response = 1{rating > 3}``, the category shares
        ``comedy, children, drama`` (``1/C`` for each of a movie's ``C``
        categories, action as baseline), ``popularity =
        logit((l + 0.5) / (r + 1))`` over each movie's ``r`` ratings of which
        ``l`` are >= 4, and ``mood`` (1 iff the user's previous 30 ratings
        were all >= 4).
    skipped : int
        Number of malformed rows dropped.
    """
    need = ["user_id", "movie_id", "rating", "timestamp", "genres"]
    missing = [c for c in need if c not in ratings.columns]
    if missing:
        raise ValueError(f"ratings table lacks columns {missing}")
    df = ratings[need].copy()
    df["rating"] = pd.to_numeric(df["rating"], errors="coerce")
    df["timestamp"] = pd.to_numeric(df["timestamp"], errors="coerce")
    ok = df.notna().all(axis=1)
    skipped = int((~ok).sum())
    if skipped:
        log.warning("skipped %d malformed rating rows", skipped)
    df = df[ok].reset_index(drop=True)

    high = df["rating"] >= 4
    per_movie = high.groupby(df["movie_id"]).agg(["sum", "size"])
    l_cnt = df["movie_id"].map(per_movie["sum"])
    r_cnt = df["movie_id"].map(per_movie["size"])
    popularity = logit((l_cnt + 0.5) / (r_cnt + 1.0))

    order = df.sort_values(["user_id", "timestamp"], kind="stable").index
    hi_sorted = high.loc[order].astype(int)
    prev = hi_sorted.groupby(df.loc[order, "user_id"]).transform(
        lambda s: s.shift(1).rolling(MOOD_WINDOW, min_periods=MOOD_WINDOW).sum()
    )
    mood = (prev == MOOD_WINDOW).astype(int).reindex(df.index)

    cats = np.array([_categories(g) for g in df["genres"]]).reshape(-1, len(CATEGORY_COLUMNS))
    out = pd.DataFrame({
        "user_id": df["user_id"],
        "movie_id": df["movie_id"],
        "timestamp": df["timestamp"],
        "rating": df["rating"],
        "response": (df["rating"] > 3).astype(int),
    })
    for j, c in enumerate(CATEGORY_COLUMNS):
        out[c] = cats[:, j]
    out["popularity"] = popularity.to_numpy()
    out["mood"] = mood.to_numpy()
    return out, skipped

"""Independent reference samplers and densities used as test oracles."""

import math

import numba
import numpy as np
from scipy import integrate

PG_TERMS = 10_000


@numba.njit(cache=True)
def _pg_series(b, c, terms, rng, out):
    # PG(b, c) = (1 / 2 pi^2) sum_k g_k / ((k - 1/2)^2 + c^2 / (4 pi^2)),  g_k ~ Gamma(b, 1)
    shift = c * c / (4.0 * math.pi * math.pi)
    for i in range(out.size):
        acc = 0.0
        for k in range(1, terms + 1):
            h = k - 0.5
            acc += rng.standard_gamma(b) / (h * h + shift)
        out[i] = acc / (2.0 * math.pi * math.pi)
    return out


def pg_truncated_sum(b, c, size, rng, terms=PG_TERMS):
    """PG(b, c) draws from the infinite-sum representation truncated at ``terms``."""
    return _pg_series(float(b), float(c), terms, rng, np.empty(size))


def pg_mean_by_differentiation(b, c, h=1e-5):
    """E[PG(b, c)] = -d/dt log E[exp(-t w)] at t=0, E[exp(-t w)] = cosh^b(c/2) / cosh^b(sqrt((c^2 + 2t)/4))."""

    def log_laplace(t):
        return b * (math.log(math.cosh(c / 2.0)) - math.log(math.cosh(math.sqrt((c * c + 2.0 * t) / 4.0))))

    return -(log_laplace(h) - log_laplace(-h)) / (2.0 * h)


def ig_pdf(x, mu, lam):
    return np.sqrt(lam / (2 * np.pi * x ** 3)) * np.exp(-lam * (x - mu) ** 2 / (2 * mu * mu * x))


def ig_variance_by_quadrature(mu, lam):
    m1 = integrate.quad(lambda x: x * ig_pdf(x, mu, lam), 0, np.inf, limit=200)[0]
    m2 = integrate.quad(lambda x: x * x * ig_pdf(x, mu, lam), 0, np.inf, limit=200)[0]
    return m2 - m1 * m1


def inv_chisq_mean_by_quadrature(df):
    from scipy.stats import chi2

    return integrate.quad(lambda x: chi2.pdf(x, df) / x, 0, np.inf)[0]


def tau_cdf(lam, beta, sigma2):
    """CDF of the density proportional to tau^{-1/2} exp(-lam^2 tau / 2 - beta^2 / (2 sigma2 tau))."""

    def kern(t):
        return t ** -0.5 * math.exp(-0.5 * lam * lam * t - beta * beta / (2.0 * sigma2 * t))

    norm = integrate.quad(kern, 0, np.inf, limit=400)[0]
    grid = np.concatenate([[0.0], np.geomspace(1e-6, 200.0, 4000)])
    vals = np.array([kern(t) if t > 0 else 0.0 for t in grid])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))]) / norm

    def cdf(x):
        return np.interp(x, grid, cum, right=1.0)

    return cdf


# --- ratings features -------------------------------------------------------

ML_GENRES = [
    "Action", "Adventure", "Animation", "Children", "Children's", "Comedy", "Crime", "Documentary",
    "Drama", "Fantasy", "Film-Noir", "Horror", "IMAX", "Musical", "Mystery", "Romance", "Sci-Fi",
    "Thriller", "War", "Western", "(no genres listed)",
]


def synthetic_ratings(rows, seed, users=12, movies=40, malformed=0):
    """Ratings table with MovieLens-style columns; the first user rates mostly 4-5 so mood can fire."""
    import pandas as pd

    rng = np.random.default_rng(seed)
    genres = ["|".join(rng.choice(ML_GENRES, size=rng.integers(1, 4), replace=False)) for _ in range(movies)]
    user = rng.integers(1, users + 1, rows)
    user[: rows // 4] = 1
    movie = rng.integers(1, movies + 1, rows)
    rating = rng.choice([1.0, 2.0, 3.0, 3.5, 4.0, 4.5, 5.0], size=rows)
    rating[user == 1] = rng.choice([4.0, 4.5, 5.0, 3.0], size=(user == 1).sum(), p=[0.4, 0.3, 0.28, 0.02])
    ts = rng.integers(978_300_000, 978_400_000, rows).astype(object)
    ts[5] = ts[6]  # a timestamp tie
    df = pd.DataFrame({
        "user_id": user, "movie_id": movie, "rating": rating.astype(object),
        "timestamp": ts, "genres": [genres[m - 1] for m in movie],
    })
    for i in rng.choice(rows, size=malformed, replace=False):
        kind = rng.integers(3)
        if kind == 0:
            df.at[i, "rating"] = "n/a"
        elif kind == 1:
            df.at[i, "timestamp"] = None
        else:
            df.at[i, "genres"] = None
    return df


_CATEGORY_OF = {}
for _g in ("Action", "Adventure", "Fantasy", "Horror", "Sci-Fi", "Thriller"):
    _CATEGORY_OF[_g] = "action"
for _g in ("Animation", "Children", "Children's"):
    _CATEGORY_OF[_g] = "children"
for _g in ("Crime", "Documentary", "Drama", "Film-Noir", "Musical", "Mystery", "Romance", "War", "Western"):
    _CATEGORY_OF[_g] = "drama"
_CATEGORY_OF["Comedy"] = "comedy"


def features_by_loops(records):
    """Row-by-row reimplementation of the ratings features.

    ``records`` is a list of dicts with keys user_id, movie_id, rating,
    timestamp, genres.  Returns (list of feature dicts for kept rows, skipped).
    """
    kept = []
    skipped = 0
    for r in records:
        try:
            rating = float(r["rating"])
            ts = float(r["timestamp"])
        except (TypeError, ValueError):
            skipped += 1
            continue
        if r["genres"] is None or r["user_id"] is None or r["movie_id"] is None or math.isnan(rating) or math.isnan(ts):
            skipped += 1
            continue
        kept.append({"user_id": r["user_id"], "movie_id": r["movie_id"], "rating": rating,
                     "timestamp": ts, "genres": r["genres"]})

    high, total = {}, {}
    for r in kept:
        total[r["movie_id"]] = total.get(r["movie_id"], 0) + 1
        high[r["movie_id"]] = high.get(r["movie_id"], 0) + (r["rating"] >= 4)

    mood = [0] * len(kept)
    by_user = {}
    for i, r in enumerate(kept):
        by_user.setdefault(r["user_id"], []).append(i)
    for idx in by_user.values():
        idx = sorted(idx, key=lambda i: (kept[i]["timestamp"], i))
        for pos, i in enumerate(idx):
            if pos >= 30 and all(kept[j]["rating"] >= 4 for j in idx[pos - 30:pos]):
                mood[i] = 1

    out = []
    for i, r in enumerate(kept):
        cats = set()
        for g in r["genres"].split("|"):
            if g in _CATEGORY_OF:
                cats.add(_CATEGORY_OF[g])
        share = {c: (1.0 / len(cats) if c in cats else 0.0) for c in ("comedy", "children", "drama")}
        l, n = high[r["movie_id"]], total[r["movie_id"]]
        prob = (l + 0.5) / (n + 1.0)
        out.append({
            "comedy": share["comedy"], "children": share["children"], "drama": share["drama"],
            "popularity": math.log(prob / (1.0 - prob)), "mood": mood[i],
            "response": int(r["rating"] > 3), "rating": r["rating"],
        })
    return out, skipped

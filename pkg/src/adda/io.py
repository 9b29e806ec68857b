"""CSV and JSON formats for data, priors, draws and run metadata.

Data files
    logistic: ``y, s, x1..xp``; lasso: ``y, x1..xp``;
    lme (long format): ``subject_id, y, x1..xp, z1..zq``.
Prior files (JSON)
    logistic: ``{mu_beta, Sigma_beta}``; lasso: ``{alpha, b, lambda}``;
    lme: ``{M, a, V_alpha, W, s}``.
"""

import json
import re

import numpy as np
import pandas as pd

from .engine import DrawMatrix
from .models.lasso import LassoData, LassoHyper
from .models.lme import LmeData, LmePrior
from .models.logistic import LogisticData, LogisticPrior

MODELS = ("logistic", "lasso", "lme")


def _numbered(df, prefix):
    cols = [c for c in df.columns if re.fullmatch(rf"{prefix}\d+", str(c))]
    cols.sort(key=lambda c: int(c[len(prefix):]))
    if not cols:
        raise ValueError(f"no {prefix}1.. columns found")
    return df[cols].to_numpy(dtype=float)


def _require(df, cols, path):
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")


def load_data(model, path):
    """Read a model's data CSV."""
    df = pd.read_csv(path)
    if model == "logistic":
        _require(df, ["y", "s"], path)
        return LogisticData(df["y"].to_numpy(), df["s"].to_numpy(), _numbered(df, "x"))
    if model == "lasso":
        _require(df, ["y"], path)
        return LassoData(df["y"].to_numpy(dtype=float), _numbered(df, "x"))
    if model == "lme":
        _require(df, ["subject_id", "y"], path)
        return LmeData.from_long(df["subject_id"].to_numpy(), df["y"].to_numpy(dtype=float),
                                 _numbered(df, "x"), _numbered(df, "z"))
    raise ValueError(f"unknown model {model!r}")


def data_frame(model, data):
    """Inverse of :func:`load_data` as a DataFrame."""
    if model == "logistic":
        df = pd.DataFrame({"y": data.y, "s": data.s})
        X = data.X
    elif model == "lasso":
        df = pd.DataFrame({"y": data.y})
        X = data.X
    elif model == "lme":
        sid = np.concatenate([np.full(s.y.size, j + 1) for j, s in enumerate(data.subjects)])
        df = pd.DataFrame({"subject_id": sid, "y": data.y})
        X = data.X
        Z = data.Z
    else:
        raise ValueError(f"unknown model {model!r}")
    for j in range(X.shape[1]):
        df[f"x{j + 1}"] = X[:, j]
    if model == "lme":
        for j in range(Z.shape[1]):
            df[f"z{j + 1}"] = Z[:, j]
    return df


def save_data(model, data, path):
    data_frame(model, data).to_csv(path, index=False, float_format="%.17g")


def load_prior(model, path):
    with open(path) as fh:
        cfg = json.load(fh)
    try:
        if model == "logistic":
            return LogisticPrior(cfg["mu_beta"], cfg["Sigma_beta"])
        if model == "lasso":
            return LassoHyper(float(cfg["alpha"]), float(cfg["b"]), float(cfg["lambda"]))
        if model == "lme":
            return LmePrior(float(cfg["M"]), float(cfg["a"]), cfg["V_alpha"], cfg["W"], float(cfg["s"]))
    except KeyError as exc:
        raise ValueError(f"{path}: prior lacks field {exc}") from exc
    raise ValueError(f"unknown model {model!r}")


def prior_dict(model, prior):
    if model == "logistic":
        return {"mu_beta": prior.mu_beta.tolist(), "Sigma_beta": prior.Sigma_beta.tolist()}
    if model == "lasso":
        return {"alpha": prior.alpha, "b": prior.b, "lambda": prior.lam}
    if model == "lme":
        return {"M": prior.M, "a": prior.a, "V_alpha": prior.V_alpha.tolist(),
                "W": prior.W.tolist(), "s": prior.s}
    raise ValueError(f"unknown model {model!r}")


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_draws(path):
    df = pd.read_csv(path)
    return DrawMatrix(list(df.columns), df.to_numpy(dtype=float))


def write_draws(draws, path):
    pd.DataFrame(draws.values, columns=draws.names).to_csv(path, index=False, float_format="%.17g")

"""Command-line experiment runner.

Subcommands::

    adda run        run one chain and write draws.csv and run.json
    adda metrics    accuracy.csv and se.csv comparing two draws files
    adda gen        write a simulated data set
    adda check-lme  evaluate the fixed-Gamma ergodicity conditions
    adda features   build the ratings design table

Exit status is 0 on success, 1 on invalid input and 2 when a run fails.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from . import datagen, diagnostics, io
from .engine import DelayModel, SelectionPolicy, run_chain
from .errors import ChainError
from .models import LassoKernel, LmeKernel, LogisticKernel
from .models.lme import LmePrior, check_assumption1

log = logging.getLogger("adda")

RUN_DEFAULTS = {
    "model": None,
    "k": 10,
    "r": 1.0,
    "epsilon": 0.0,
    "iters": 1000,
    "seed": 0,
    "mode": "virtual",
    "data": None,
    "generate": None,
    "data_seed": None,
    "prior": None,
    "out": ".",
    "record": None,
    "predict_at": None,
    "fix_gamma": False,
    "delay": "exponential",
    "delay_rate": 1.0,
    "delay_mu": 0.0,
    "delay_sigma": 0.5,
    "tick": 1e-3,
    "part_seed": None,
}


class UsageError(Exception):
    """Invalid configuration (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(float(v)) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"not a comma separated list of integers: {text!r}") from exc


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"not a comma separated list of numbers: {text!r}") from exc


# ---------------------------------------------------------------------------
# run


def resolve_config(args):
    """Defaults, then the JSON config file, then explicitly given flags."""
    cfg = dict(RUN_DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(RUN_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in RUN_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["model"] not in io.MODELS:
        raise UsageError(f"--model must be one of {io.MODELS}")
    if (cfg["data"] is None) == (cfg["generate"] is None):
        raise UsageError("give exactly one of --data or --generate")
    return cfg


def build_kernel(cfg):
    model = cfg["model"]
    data_seed = cfg["seed"] if cfg["data_seed"] is None else cfg["data_seed"]
    if cfg["data"] is not None:
        data = io.load_data(model, cfg["data"])
    elif model == "logistic":
        data, _ = datagen.gen_logistic(int(cfg["generate"]), data_seed)
    elif model == "lasso":
        data, _, _ = datagen.gen_lasso(int(cfg["generate"]), data_seed)
    else:
        data, _ = datagen.gen_lme(int(cfg["generate"]), data_seed)
    prior = io.load_prior(model, cfg["prior"]) if cfg["prior"] else None
    part_seed = data_seed if cfg["part_seed"] is None else cfg["part_seed"]
    k = int(cfg["k"])
    if model == "logistic":
        x = cfg["predict_at"]
        if isinstance(x, str):
            x = np.ones(data.p) if x == "ones" else _float_list(x)
        return LogisticKernel(data, datagen.partition(data.n, k, part_seed), prior, predict_at=x)
    if model == "lasso":
        return LassoKernel(data, datagen.partition(data.p, k, part_seed), prior)
    return LmeKernel(data, datagen.partition(data.m, k, part_seed), prior, fix_gamma=bool(cfg["fix_gamma"]))


def build_policy(cfg):
    delays = DelayModel(
        kind=cfg["delay"], rate=float(cfg["delay_rate"]),
        mu=float(cfg["delay_mu"]), sigma=float(cfg["delay_sigma"]),
    )
    return SelectionPolicy(
        k=int(cfg["k"]), r=float(cfg["r"]), epsilon=float(cfg["epsilon"]),
        mode=cfg["mode"], delays=delays, tick=float(cfg["tick"]),
    )


def record_spec(kernel, record):
    """Restrict recorded columns to those whose names start with one of the given prefixes."""
    names = kernel.functional_names()
    if not record:
        return None
    prefixes = record.split(",") if isinstance(record, str) else list(record)
    idx = [j for j, n in enumerate(names) if any(n.startswith(p.strip()) for p in prefixes)]
    if not idx:
        raise UsageError(f"--record {record!r} matches none of {names}")
    return [names[j] for j in idx], lambda theta: np.asarray(kernel.functionals(theta))[idx]


def cmd_run(args):
    cfg = resolve_config(args)
    try:
        kernel = build_kernel(cfg)
        policy = build_policy(cfg)
        record = record_spec(kernel, cfg["record"])
        iters = int(cfg["iters"])
        if iters < 1:
            raise UsageError("--iters must be >= 1")
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    draws, stats = run_chain(kernel, policy, iters, int(cfg["seed"]), record=record)
    os.makedirs(cfg["out"], exist_ok=True)
    io.write_draws(draws, os.path.join(cfg["out"], "draws.csv"))
    meta = {
        "model": cfg["model"],
        "k": policy.k,
        "r": policy.r,
        "epsilon": policy.epsilon,
        "iters": iters,
        "seed": int(cfg["seed"]),
        "mode": policy.mode,
        "delay": policy.delays.as_dict(),
        **stats.as_dict(),
    }
    io.write_json(meta, os.path.join(cfg["out"], "run.json"))
    log.info("wrote %d draws to %s", iters, cfg["out"])


# ---------------------------------------------------------------------------
# other commands


def _t_grid(text, length):
    if text is None:
        return np.unique(np.linspace(min(100, length), length, 20).astype(int))
    return np.array(_int_list(text))


def cmd_metrics(args):
    try:
        adda = io.read_draws(args.adda)
        parent = io.read_draws(args.parent)
        t = _t_grid(args.t, min(len(adda), len(parent)))
        acc = diagnostics.accuracy_curve(adda, parent, t)
        se = diagnostics.se_curve(adda, parent, t)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    acc.to_csv(os.path.join(args.out, "accuracy.csv"))
    se.to_csv(os.path.join(args.out, "se.csv"))


def cmd_gen(args):
    model = args.model
    try:
        if model == "logistic":
            data, beta = datagen.gen_logistic(args.n, args.seed)
            truth = {"beta": beta.tolist()}
        elif model == "lasso":
            data, beta, sigma2 = datagen.gen_lasso(args.n, args.seed)
            truth = {"beta": beta.tolist(), "sigma2": sigma2}
        else:
            data, t = datagen.gen_lme(args.m, args.seed, n_i=args.n_i)
            truth = {key: np.asarray(v).tolist() for key, v in t.items()}
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    io.save_data(model, data, os.path.join(args.out, "data.csv"))
    io.write_json(truth, os.path.join(args.out, "truth.json"))


def cmd_check_lme(args):
    try:
        if not args.epsilon > 0:
            raise UsageError("--epsilon must be positive")
        data = io.load_data("lme", args.data)
        prior = io.load_prior("lme", args.prior) if args.prior else None
        if prior is None:
            prior = LmePrior.default(data.p, data.q, fix_gamma=True)
        report = check_assumption1(data, prior, args.epsilon)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    print(json.dumps(report.as_dict()))


def cmd_features(args):
    try:
        ratings = pd.read_csv(args.ratings)
        table, skipped = datagen.movielens_features(ratings)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    table.to_csv(args.out, index=False, float_format="%.17g")
    print(json.dumps({"rows": len(table), "skipped": skipped}))


# ---------------------------------------------------------------------------


def build_parser():
    ap = _Parser(prog="adda", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one chain")
    run.add_argument("--config", help="JSON file of run settings; flags take precedence")
    run.add_argument("--model", choices=io.MODELS)
    run.add_argument("--k", type=int)
    run.add_argument("--r", type=float)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--iters", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--mode", choices=("virtual", "live"))
    run.add_argument("--data", help="data CSV")
    run.add_argument("--generate", type=int, metavar="SIZE",
                     help="simulate data instead: n (logistic, lasso) or m subjects (lme)")
    run.add_argument("--data-seed", type=int)
    run.add_argument("--part-seed", type=int)
    run.add_argument("--prior", help="prior JSON")
    run.add_argument("--out", help="output directory")
    run.add_argument("--record", help="comma separated name prefixes of recorded columns")
    run.add_argument("--predict-at", help="logistic: covariate vector (comma list or 'ones') for a prob column")
    run.add_argument("--fix-gamma", action="store_const", const=True, help="lme: pin Gamma = I")
    run.add_argument("--delay", choices=("constant", "exponential", "lognormal"))
    run.add_argument("--delay-rate", type=float)
    run.add_argument("--delay-mu", type=float)
    run.add_argument("--delay-sigma", type=float)
    run.add_argument("--tick", type=float, help="live mode: seconds per delay unit")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="accuracy and SE curves")
    met.add_argument("--adda", required=True)
    met.add_argument("--parent", required=True)
    met.add_argument("--t", help="comma separated prefix lengths")
    met.add_argument("--out", default=".")
    met.set_defaults(func=cmd_metrics)

    gen = sub.add_parser("gen", help="simulate a data set")
    gen.add_argument("--model", choices=io.MODELS, required=True)
    gen.add_argument("--n", type=int, default=10_000)
    gen.add_argument("--m", type=int, default=100)
    gen.add_argument("--n-i", type=int, default=10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=".")
    gen.set_defaults(func=cmd_gen)

    chk = sub.add_parser("check-lme", help="fixed-Gamma ergodicity conditions")
    chk.add_argument("--data", required=True)
    chk.add_argument("--prior")
    chk.add_argument("--epsilon", type=float, required=True)
    chk.set_defaults(func=cmd_check_lme)

    feat = sub.add_parser("features", help="ratings design table")
    feat.add_argument("--ratings", required=True)
    feat.add_argument("--out", required=True)
    feat.set_defaults(func=cmd_features)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"adda: error: {exc}", file=sys.stderr)
        return 1
    except (ChainError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"adda: run failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

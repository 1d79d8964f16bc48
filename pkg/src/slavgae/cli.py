"""Command-line entry point: ``slavgae <command> ...``.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .autodiff import grad_check
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    TRAIN_LABELED,
    SbmConfig,
    generate_sbm,
    load_dataset,
    load_splits,
    make_splits,
    save_dataset,
    save_splits,
)
from .errors import InvalidConfigError, SlaVgaeError
from .graph import SparseGraph, normalize_adjacency
from .model import ModelDims, build_input, init_params, label_matrix, objective
from .trainer import TrainConfig, evaluate, model_dims, predict, save_run_config, train

log = logging.getLogger("slavgae")

CHECKPOINT_NAME = "model.ckpt"
SWEEP_PARAMS = {"K": "k", "p": "p", "theta": "theta", "labeling_rate": None}


class UsageError(Exception):
    pass


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InvalidConfigError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{what} file {path} is not valid JSON: {exc}") from None


def _parse_set(items):
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def resolve_config(config_path=None, overrides=(), seed=None) -> TrainConfig:
    """Defaults, then the JSON file, then ``--set`` pairs, then ``--seed``."""
    base = _read_json(config_path, "config") if config_path else {}
    if not isinstance(base, dict):
        raise InvalidConfigError("config file must hold a JSON object")
    cfg = TrainConfig.from_dict(base).with_overrides(_parse_set(overrides))
    if seed is not None:
        cfg = cfg.with_overrides({"seed": seed})
    return cfg


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands -------------------------------------------------------------------------------


def cmd_train(args):
    cfg = resolve_config(args.config, args.set, args.seed)
    ds = load_dataset(args.data)
    splits = load_splits(args.splits, ds.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_run_config(cfg, out / "resolved-config.json")

    params, history = train(ds, splits, cfg)
    dims = model_dims(cfg, ds)
    save_checkpoint(out / CHECKPOINT_NAME, params, dims, cfg.seed, cfg.to_dict())
    history.write_csv(out / "history.csv")

    metrics = {"best_epoch": history.best_epoch, "epochs": len(history.records)}
    for role in ("val", "test"):
        nodes = splits.nodes(role)
        if np.any(ds.labels[nodes] >= 0):
            metrics[role] = evaluate(params, ds, splits, role).as_dict()
        else:
            metrics[role] = None
    _write_json(out / "metrics.json", metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_eval(args):
    params, _, _, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    splits = load_splits(args.splits, ds.n)
    report = evaluate(params, ds, splits, args.role)
    print(json.dumps(report.as_dict(), sort_keys=True))
    return 0


def cmd_predict(args):
    params, _, _, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    if args.splits:
        splits = load_splits(args.splits, ds.n)
        y_in = label_matrix(ds.labels, ds.num_classes, splits.nodes(TRAIN_LABELED))
    else:
        y_in = np.zeros((ds.n, ds.num_classes))
    ids, probs = predict(params, ds.graph, ds.features, y_in)
    with Path(args.out).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "predicted_class", "max_probability"])
        for i, (c, pr) in enumerate(zip(ids, probs.max(axis=1))):
            w.writerow([i, int(c), repr(float(pr))])
    return 0


def _sbm_config(path, seed):
    raw = _read_json(path, "SBM config") if path else {}
    names = {f.name for f in fields(SbmConfig)}
    unknown = set(raw) - names
    if unknown:
        raise InvalidConfigError(f"unknown SBM config keys: {sorted(unknown)}")
    if seed is not None:
        raw["seed"] = seed
    return SbmConfig(**raw)


def cmd_synth(args):
    cfg = _sbm_config(args.sbm_config, args.seed)
    ds = generate_sbm(cfg)
    save_dataset(ds, args.out)
    _write_json(Path(args.out) / "sbm-config.json", asdict(cfg))
    if args.labeling_rate is not None:
        splits = make_splits(ds, (args.val, args.test), args.labeling_rate, cfg.seed)
        save_splits(splits, Path(args.out) / "splits.csv")
    return 0


def cmd_split(args):
    ds = load_dataset(args.data)
    save_splits(make_splits(ds, (args.val, args.test), args.labeling_rate, args.seed), args.out)
    return 0


def gradcheck_instance(cfg: TrainConfig, seed: int):
    """Small random problem shaped by ``cfg`` (widths capped at 8)."""
    rng = np.random.default_rng(seed)
    n, d, c = 12, 4, 3
    dims = ModelDims(d, c, min(cfg.hidden_dim, 8), min(cfg.latent_dim, 8), cfg.ffn_layers,
                     use_labels=not cfg.ablation.no_label)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3]
    adj = normalize_adjacency(SparseGraph.from_edges(n, pairs))
    x = rng.normal(size=(n, d))
    rows = rng.choice(n, size=4, replace=False)
    y = np.zeros((n, c))
    y[rows] = rng.dirichlet(np.ones(c), size=rows.size)
    # jitter off the zero-bias init so no ReLU input sits exactly on its kink
    params = {k: v + rng.normal(scale=0.1, size=v.shape) for k, v in init_params(dims, rng).items()}
    noise = rng.standard_normal((n, dims.latent))
    h0 = build_input(x, y) if dims.use_labels else x

    def f(tape, pv):
        return objective(tape, pv, adj, h0, x, y, rows, noise, cfg.effective_lambda_feat)[0]

    return f, params


def cmd_gradcheck(args):
    cfg = resolve_config(args.config, args.set, args.seed)
    f, params = gradcheck_instance(cfg, cfg.seed)
    report = grad_check(f, params, eps=1e-5, tol=1e-4)
    print(json.dumps({"max_relative_error": report.max_rel_error, "worst": report.worst,
                      "passed": report.passed}, sort_keys=True))
    return 0 if report.passed else 1


def cmd_sweep(args):
    cfg = resolve_config(args.config, args.set, args.seed)
    key = SWEEP_PARAMS[args.param]
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    if not values:
        raise UsageError("--values is empty")
    ds = load_dataset(args.data)
    rows = []
    for value in values:
        accs, mccs = [], []
        for i in range(args.seeds):
            seed = cfg.seed + i
            rate = value if key is None else args.labeling_rate
            run_cfg = cfg.with_overrides({"seed": seed} if key is None else {"seed": seed, key: value})
            splits = make_splits(ds, (args.val, args.test), rate, seed)
            params, _ = train(ds, splits, run_cfg)
            rep = evaluate(params, ds, splits, "test")
            accs.append(rep.accuracy)
            mccs.append(rep.mcc)
            log.info("%s=%g seed=%d test_acc=%.4f", args.param, value, seed, rep.accuracy)
        rows.append([args.param, repr(value), args.seeds, repr(float(np.mean(accs))),
                     repr(float(np.std(accs))), repr(float(np.mean(mccs))), repr(float(np.std(mccs)))])
    header = ["param", "value", "seeds", "test_accuracy_mean", "test_accuracy_std",
              "test_mcc_mean", "test_mcc_std"]
    fh = Path(args.out).open("w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


# -- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slavgae", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def config_flags(sp):
        sp.add_argument("--config", help="JSON training config")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (dotted path, JSON value); repeatable")
        sp.add_argument("--seed", type=int, help="overrides the config seed")

    sp = sub.add_parser("train", help="train a model and write artifacts")
    sp.add_argument("--data", required=True)
    sp.add_argument("--splits", required=True)
    sp.add_argument("--out", required=True)
    config_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score a checkpoint on one split role")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--splits", required=True)
    sp.add_argument("--role", default="test")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("predict", help="write per-node predictions")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--splits", help="feed train_labeled ground truth as label input")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("synth", help="generate a stochastic block model dataset")
    sp.add_argument("--sbm-config", help="JSON object of SBM parameters")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--labeling-rate", type=float, help="also write splits.csv")
    sp.add_argument("--val", type=float, default=0.1)
    sp.add_argument("--test", type=float, default=0.2)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("split", help="write a seeded splits.csv for a dataset")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--labeling-rate", type=float, default=1.0)
    sp.add_argument("--val", type=float, default=0.1)
    sp.add_argument("--test", type=float, default=0.2)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("gradcheck", help="finite-difference check of the loss gradient")
    config_flags(sp)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("sweep", help="mean and std of test metrics over a parameter grid")
    sp.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    sp.add_argument("--values", required=True, help="comma-separated list")
    sp.add_argument("--data", required=True)
    sp.add_argument("--seeds", type=int, default=3, help="runs per value, seeds seed..seed+N-1")
    sp.add_argument("--labeling-rate", type=float, default=0.01)
    sp.add_argument("--val", type=float, default=0.1)
    sp.add_argument("--test", type=float, default=0.2)
    sp.add_argument("--out", help="CSV path (default stdout)")
    config_flags(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, InvalidConfigError) as exc:
        print(f"slavgae {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SlaVgaeError, OSError) as exc:
        print(f"slavgae {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


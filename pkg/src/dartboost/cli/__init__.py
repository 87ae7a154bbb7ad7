"""Command-line interface.

Exit codes: 0 success, 2 usage or configuration error, 3 data/model
mismatch, 4 any other domain error (malformed files, bad labels, ...).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from .. import __version__
from ..data import load_csv, load_svmlight
from ..diagnostics import contribution_curve_csv, contribution_report, export_dot
from ..ensemble import load as load_model
from ..ensemble import save as save_model
from ..errors import ConfigError, DartboostError, FeatureMismatchError
from ..metrics import predict_labels
from ..trainer import TrainerConfig, train
from .cv import grouped_folds
from .evaluation import METRICS, evaluate_scores, format_table
from .manifest import build_manifest, file_sha256, manifest_path, read_manifest, write_atomic
from .settings import config_from_settings
from .sweep import read_grid, run_sweep

EXIT_USAGE = 2
EXIT_MISMATCH = 3
EXIT_DOMAIN = 4

NDCG_NOTE = "note: queries whose grades are all 0 score NDCG 1.0"


class DataMismatchError(DartboostError):
    """Input data differs from what a model or manifest was built from."""


def _data_source(args, expect_qid=False, group_column=None):
    path = args.data
    fmt = "csv" if str(path).lower().endswith(".csv") else "svmlight"
    if fmt == "csv":
        ds = load_csv(path, args.label_column, not args.no_header, group_column)
    else:
        if group_column is not None:
            raise ConfigError("--group-by-column needs CSV data")
        ds = load_svmlight(path, expect_qid=expect_qid)
    return ds, {
        "path": os.path.abspath(path),
        "sha256": file_sha256(path),
        "format": fmt,
        "label_column": args.label_column,
        "has_header": not args.no_header,
    }


def _settings(args) -> dict:
    keys = ("mode", "loss", "trees", "leaves", "seed", "shrinkage", "drop_rate", "drop_epsilon",
            "instance_fraction", "feature_fraction", "min_rows_per_leaf", "loss_lambda", "ndcg_at")
    return {k: getattr(args, k) for k in keys}


def _train_and_save(dataset, data_source, config, out, log_path):
    started = datetime.now(timezone.utc)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(log_path, "w", encoding="utf-8") as log:
        ens = train(dataset, config, lambda rec: log.write(rec.tsv() + "\n"))
    save_model(ens, out)
    manifest = build_manifest(
        config, data_source, {"model": os.path.abspath(out), "log": os.path.abspath(log_path)}, started
    )
    write_atomic(manifest_path(out), json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return ens


def cmd_train(args):
    config = config_from_settings(_settings(args))
    dataset, source = _data_source(args, expect_qid=config.loss.name == "lambdarank")
    log_path = args.log or f"{args.out}.log.tsv"
    ens = _train_and_save(dataset, source, config, args.out, log_path)
    print(f"trained {len(ens)} trees ({config.mode.value}, {config.loss.name}) -> {args.out}")


def cmd_retrain(args):
    doc = read_manifest(args.manifest)
    config = TrainerConfig.from_dict(doc["config"])
    src = doc["data"]
    if file_sha256(src["path"]) != src["sha256"]:
        raise DataMismatchError(f"{src['path']} changed since the manifest was written (sha256 differs)")
    ns = argparse.Namespace(data=src["path"], label_column=src["label_column"], no_header=not src["has_header"])
    dataset, source = _data_source(ns, expect_qid=config.loss.name == "lambdarank")
    out = args.out or doc["outputs"]["model"]
    _train_and_save(dataset, source, config, out, args.log or f"{out}.log.tsv")
    print(f"retrained {config.n_trees} trees from {args.manifest} -> {out}")


def _model_data(args, want_groups=False):
    ens = load_model(args.model)
    expect_qid = want_groups or ens.loss.name == "lambdarank"
    dataset, _ = _data_source(args, expect_qid=expect_qid)
    if dataset.n_features != ens.n_features:
        raise FeatureMismatchError(ens.n_features, dataset.n_features)
    return ens, dataset


def cmd_predict(args):
    ens, dataset = _model_data(args)
    scores = ens.predict(dataset.features)
    if ens.loss.name == "logistic":
        labels = predict_labels(scores)
        lines = [f"{float(s)!r}\t{int(c):+d}" for s, c in zip(scores, labels)]
    else:
        lines = [repr(float(s)) for s in scores]
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(args):
    metrics = args.metric or None
    ens, dataset = _model_data(args, want_groups=bool(metrics and "ndcg" in metrics))
    result = evaluate_scores(ens.loss.name, dataset, ens.predict(dataset.features), args.ndcg_at, metrics)
    print(format_table(result))
    if any(k.startswith("ndcg") for k in result):
        print(NDCG_NOTE)
    text = json.dumps(result, indent=1) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_cv(args):
    config = config_from_settings(_settings(args))
    ranking = config.loss.name == "lambdarank"
    dataset, _ = _data_source(args, expect_qid=ranking, group_column=args.group_by_column)
    if dataset.entity_ids is not None:
        groups = dataset.entity_ids
    elif ranking:
        groups = dataset.query_groups.row_group()
    else:
        groups = np.arange(dataset.n_rows)
    folds = grouped_folds(groups, args.folds, config.seed)
    per_fold = []
    for f in range(args.folds):
        train_ds = dataset.take(np.flatnonzero(folds != f))
        test_ds = dataset.take(np.flatnonzero(folds == f))
        ens = train(train_ds, config)
        m = evaluate_scores(config.loss.name, test_ds, ens.predict(test_ds.features), args.eval_at)
        per_fold.append(m)
        print(f"fold {f}: " + ", ".join(f"{k}={v!r}" for k, v in m.items()), file=sys.stderr)
    summary = {}
    for key in per_fold[0]:
        vals = [m[key] for m in per_fold if m[key] is not None]
        summary[key] = {
            "mean": float(np.mean(vals)) if vals else None,
            "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else None,
        }
    print(format_table({k: v["mean"] for k, v in summary.items()}))
    result = {"folds": per_fold, "summary": summary, "fold_of_row": folds.tolist()}
    text = json.dumps(result, indent=1) + "\n"
    if args.out:
        write_atomic(args.out, text)


def cmd_sweep(args):
    grid = read_grid(args.grid)
    base = _settings(args)
    if base["seed"] is None:
        base["seed"] = 0
    for key in ("loss",):
        if base[key] is None:
            raise ConfigError(f"--{key} is required")
    ranking = base["loss"] == "lambdarank"
    train_ds, _ = _data_source(argparse.Namespace(**{**vars(args), "data": args.train}), expect_qid=ranking)
    valid_ds, _ = _data_source(argparse.Namespace(**{**vars(args), "data": args.valid}), expect_qid=ranking)
    if train_ds.n_features != valid_ds.n_features:
        raise FeatureMismatchError(train_ds.n_features, valid_ds.n_features)
    jobs = args.jobs if args.jobs is not None else int(os.environ.get("DARTBOOST_JOBS", "1"))
    results = run_sweep(
        grid, base, train_ds, valid_ds, args.out, args.max_runs, jobs, args.eval_at,
        log=lambda msg: print(msg, file=sys.stderr),
    )
    best_i, best_combo, best_metric = results[0]
    print(f"{len(results)} runs -> {args.out}; best combination {best_i}: {best_combo} ({best_metric!r})")


def cmd_diagnose(args):
    ens, dataset = _model_data(args)
    report = contribution_report(ens, dataset, weighted=not args.unweighted)
    write_atomic(args.out, contribution_curve_csv(report))
    if args.dot_member is not None:
        dot = export_dot(ens, args.dot_member)
        dot_out = args.dot_out or f"{os.path.splitext(args.out)[0]}_tree{args.dot_member}.dot"
        write_atomic(dot_out, dot)
        print(f"wrote {dot_out}")
    print(f"wrote {args.out} ({len(report.rows)} members)")


def _add_data_flags(p, data_required=True):
    if data_required:
        p.add_argument("--data", required=True, help="CSV (.csv) or SVMLight file")
    p.add_argument("--label-column", default="-1", help="CSV label column name or index (default: last)")
    p.add_argument("--no-header", action="store_true", help="CSV file has no header row")


def _add_train_flags(p, required=True):
    p.add_argument("--loss", choices=["squared", "logistic", "lambdarank"], required=required,
                   help="squared is 0.5*(pred-y)^2 (targets are plain residuals); "
                        "logistic is 1/(1+exp(lambda*y*pred)) with y in {-1,+1}; "
                        "lambdarank is the LambdaMART NDCG pairwise gradient")
    p.add_argument("--mode", choices=["mart", "dart", "rf"], required=required)
    p.add_argument("--trees", type=int, required=required, help="number of trees N")
    p.add_argument("--leaves", type=int, required=required, help="leaves per tree")
    p.add_argument("--seed", type=int, required=required)
    p.add_argument("--shrinkage", type=float, help="mart only; default 1")
    drop = p.add_mutually_exclusive_group()
    drop.add_argument("--drop-rate", type=float, help="dart: per-tree dropout probability")
    drop.add_argument("--drop-epsilon", action="store_true", help="dart: drop exactly one tree per round")
    p.add_argument("--instance-fraction", type=float, help="fraction of instances used per tree (default 1)")
    p.add_argument("--feature-fraction", type=float, help="fraction of features scanned per leaf (default 1)")
    p.add_argument("--min-rows-per-leaf", type=int, help="default 1")
    p.add_argument("--loss-lambda", type=float, help="loss parameter lambda (logistic/lambdarank; default 1)")
    p.add_argument("--ndcg-at", type=int, help="lambdarank: NDCG truncation inside the gradient (default: none)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dartboost", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dartboost {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--log", help="training log TSV (default <out>.log.tsv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrain", help="re-run training from a run manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="model path (default: the manifest's)")
    p.add_argument("--log")
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("predict", help="score a dataset")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--out", help="score file (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="compute metrics of a model on a dataset")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--metric", nargs="+", choices=METRICS)
    p.add_argument("--ndcg-at", type=int, default=3, help="report ndcg@1..k (default 3)")
    p.add_argument("--out", help="metrics JSON (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--folds", type=int, required=True)
    p.add_argument("--group-by-column", help="CSV column of entity ids; folds never split an entity")
    p.add_argument("--eval-at", type=int, default=3, help="ranking: report ndcg@1..k")
    p.add_argument("--out", help="per-fold results JSON")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="train every combination of a parameter grid")
    p.add_argument("--grid", required=True, help="TOML file of key = [values] lists")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    _add_data_flags(p, data_required=False)
    _add_train_flags(p, required=False)
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--max-runs", type=int, default=1000)
    p.add_argument("--jobs", type=int, help="parallel workers (default $DARTBOOST_JOBS or 1)")
    p.add_argument("--eval-at", type=int, default=3)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="per-tree contribution CSV and DOT export")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--out", required=True, help="contribution CSV")
    p.add_argument("--dot-member", type=int, help="also export this member (0-based) as DOT")
    p.add_argument("--dot-out")
    p.add_argument("--unweighted", action="store_true", help="contributions of T(x) instead of w*T(x)")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as e:
        print(f"dartboost: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FeatureMismatchError, DataMismatchError) as e:
        print(f"dartboost: error: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except (DartboostError, IndexError, OSError, ValueError) as e:
        print(f"dartboost: error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0

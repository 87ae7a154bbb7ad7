"""Grid sweeps over training settings.

A grid file is TOML with one flat ``key = [v1, v2, ...]`` list per
parameter (scalars count as one-element lists). Keys are train flag names
with dashes turned into underscores, e.g.::

    shrinkage = [0.05, 0.1, 0.2, 0.4]
    loss_lambda = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2]
    feature_fraction = [0.5, 0.75, 1.0]
    drop_rate = ["epsilon", 0.015]

Every combination is trained on the training set and scored on the
validation set. Finished runs are appended to ``<out>.partial.jsonl`` so
an interrupted sweep resumes where it stopped; the final CSV is written
once, sorted best-first, and does not depend on completion order.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor, as_completed

from ..errors import ConfigError
from ..rng import derive_seed
from ..trainer import EPSILON, train
from .evaluation import evaluate_scores
from .manifest import write_atomic
from .settings import SETTING_TYPES, config_from_settings

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


def _coerce(key, value):
    kind = SETTING_TYPES[key]
    if key == "drop_rate" and value == EPSILON:
        return EPSILON
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"malformed grid: {key} values must be true/false")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"malformed grid: {key} values must be strings")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"malformed grid: {key} value {value!r} is not a number")
    if kind is int and value != int(value):
        raise ConfigError(f"malformed grid: {key} value {value!r} is not an integer")
    return kind(value)


def parse_grid(text: str) -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed grid: {e}") from e
    grid = {}
    for key, values in doc.items():
        if key not in SETTING_TYPES or key in ("seed", "loss"):
            raise ConfigError(f"malformed grid: unknown parameter {key!r}")
        if not isinstance(values, list):
            values = [values]
        if not values:
            raise ConfigError(f"malformed grid: {key} has no values")
        grid[key] = [_coerce(key, v) for v in values]
    if not grid:
        raise ConfigError("malformed grid: no parameters")
    return grid


def read_grid(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_grid(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read grid {path}: {e.strerror or e}") from e


def combinations(grid: dict) -> list:
    keys = list(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def validation_metric(loss_name: str, eval_at: int):
    """(column name, higher-is-better) used to rank sweep results."""
    if loss_name == "squared":
        return "rmse", False
    if loss_name == "logistic":
        return "accuracy", True
    return f"ndcg@{eval_at}", True


def _run_one(index, settings, train_ds, valid_ds, eval_at):
    config = config_from_settings(settings)
    ens = train(train_ds, config)
    metrics = evaluate_scores(config.loss.name, valid_ds, ens.predict(valid_ds.features), eval_at)
    name, _ = validation_metric(config.loss.name, eval_at)
    return index, metrics[name]


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def run_sweep(grid, base: dict, train_ds, valid_ds, out_path, max_runs=1000, jobs=1, eval_at=3, log=None):
    combos = combinations(grid)
    if len(combos) > max_runs:
        raise ConfigError(f"grid has {len(combos)} combinations, above --max-runs {max_runs}")
    runs = []
    for i, combo in enumerate(combos):
        settings = {**base, **combo, "seed": derive_seed(base["seed"], i)}
        try:
            config_from_settings(settings)
        except (ConfigError, ValueError) as e:
            raise ConfigError(f"grid combination {i} ({combo}) is invalid: {e}") from e
        runs.append(settings)

    partial_path = os.fspath(out_path) + ".partial.jsonl"
    done = {}
    if os.path.exists(partial_path):
        with open(partial_path, encoding="utf-8") as fh:
            for line in fh:
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from an interrupted write
                i = rec.get("index")
                if not isinstance(i, int) or not 0 <= i < len(combos) or rec.get("params") != combos[i]:
                    raise ConfigError(f"{partial_path} does not match this grid; remove it to start over")
                done[i] = rec["metric"]

    todo = [i for i in range(len(runs)) if i not in done]
    with open(partial_path, "a", encoding="utf-8") as partial:
        def record(i, metric):
            done[i] = metric
            partial.write(json.dumps({"index": i, "params": combos[i], "metric": metric}) + "\n")
            partial.flush()
            if log is not None:
                log(f"[{len(done)}/{len(runs)}] combination {i}: {metric!r}")

        if jobs <= 1:
            for i in todo:
                record(*_run_one(i, runs[i], train_ds, valid_ds, eval_at))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_run_one, i, runs[i], train_ds, valid_ds, eval_at) for i in todo]
                for fut in as_completed(futures):
                    record(*fut.result())

    name, higher = validation_metric(base["loss"], eval_at)
    order = sorted(range(len(runs)), key=lambda i: ((-done[i] if higher else done[i]), i))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    keys = list(grid)
    writer.writerow(["index", *keys, "seed", name])
    for i in order:
        writer.writerow([i, *(_fmt(combos[i][k]) for k in keys), runs[i]["seed"], _fmt(done[i])])
    write_atomic(out_path, buf.getvalue())
    os.remove(partial_path)
    return [(i, combos[i], done[i]) for i in order]

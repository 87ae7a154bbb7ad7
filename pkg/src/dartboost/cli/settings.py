"""Flag-level training settings and their translation to ``TrainerConfig``.

Settings are a flat dict keyed like the train flags (``--drop-rate`` is
``drop_rate``), which lets sweep grids name parameters exactly as the
command line does.
"""

from __future__ import annotations

from ..errors import ConfigError
from ..loss import make_loss
from ..trainer import EPSILON, Mode, TrainerConfig
from ..tree import TreeLearnConfig

SETTING_TYPES = {
    "mode": str,
    "loss": str,
    "trees": int,
    "leaves": int,
    "seed": int,
    "shrinkage": float,
    "drop_rate": float,
    "drop_epsilon": bool,
    "instance_fraction": float,
    "feature_fraction": float,
    "min_rows_per_leaf": int,
    "loss_lambda": float,
    "ndcg_at": int,
}


def _get(s, key, default):
    v = s.get(key)
    return default if v is None else v


def config_from_settings(s: dict) -> TrainerConfig:
    """Build a config, rejecting flags that make no sense for the mode."""
    for key in ("mode", "loss", "trees", "leaves", "seed"):
        if s.get(key) is None:
            raise ConfigError(f"--{key} is required")
    try:
        mode = Mode(s["mode"])
    except ValueError:
        raise ConfigError(f"unknown --mode {s['mode']!r}; expected mart, dart or rf") from None
    if s.get("shrinkage") is not None and mode is not Mode.MART:
        raise ConfigError(f"--shrinkage conflicts with --mode {mode.value} (shrinkage applies to mart only)")
    drop_rate = s.get("drop_rate")
    if drop_rate == EPSILON:
        drop_rate, epsilon = None, True
    else:
        epsilon = bool(s.get("drop_epsilon"))
    if drop_rate is not None and epsilon:
        raise ConfigError("--drop-rate conflicts with --drop-epsilon")
    if (drop_rate is not None or epsilon) and mode is not Mode.DART:
        flag = "--drop-epsilon" if epsilon else "--drop-rate"
        raise ConfigError(f"{flag} conflicts with --mode {mode.value} (dropout applies to dart only)")
    if mode is Mode.DART and drop_rate is None and not epsilon:
        raise ConfigError("--mode dart needs --drop-rate or --drop-epsilon")
    return TrainerConfig(
        mode=mode,
        n_trees=int(s["trees"]),
        loss=make_loss(s["loss"], float(_get(s, "loss_lambda", 1.0)), s.get("ndcg_at")),
        tree=TreeLearnConfig(
            int(s["leaves"]),
            int(_get(s, "min_rows_per_leaf", 1)),
            float(_get(s, "feature_fraction", 1.0)),
        ),
        shrinkage=float(_get(s, "shrinkage", 1.0)),
        p_drop=EPSILON if epsilon else (float(drop_rate) if drop_rate is not None else None),
        instance_fraction=float(_get(s, "instance_fraction", 1.0)),
        seed=int(s["seed"]),
    )

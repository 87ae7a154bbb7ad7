"""Training loops for MART, DART and random forest.

All three share one loop shape: compute targets, fit a tree, fold it into
the ensemble. They differ in which predictions the targets are taken at
and how the new tree is weighted.

* MART: targets at the full current model; new tree weighted by the
  shrinkage factor.
* DART: targets at the model with a random dropout set ``D`` removed; the
  new tree gets weight ``1/(|D|+1)`` and each dropped tree is scaled by
  ``|D|/(|D|+1)``. Shrinkage is fixed at 1.
* RF: every tree fits the targets at the zero model; final weights are
  all ``1/N``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np

from . import __version__
from .data import Dataset, subsample_rows
from .ensemble import Ensemble
from .errors import ConfigError
from .loss import LossKind, Squared, check_labels, loss_from_dict, loss_value, negative_gradient
from .rng import Stream, substream
from .tree import RegressionTree, TreeLearnConfig, fit_tree

EPSILON = "epsilon"


class Mode(str, Enum):
    MART = "mart"
    DART = "dart"
    RF = "rf"


@dataclass(frozen=True)
class TrainerConfig:
    mode: Mode
    n_trees: int
    loss: LossKind = field(default_factory=Squared)
    tree: TreeLearnConfig = field(default_factory=TreeLearnConfig)
    shrinkage: float = 1.0
    p_drop: Union[float, str, None] = None
    instance_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
        except ValueError:
            raise ConfigError(f"unknown mode {self.mode!r}; expected mart, dart or rf") from None
        if int(self.n_trees) != self.n_trees or self.n_trees < 1:
            raise ConfigError(f"n_trees must be a positive integer, got {self.n_trees}")
        if not 0.0 < self.instance_fraction <= 1.0:
            raise ConfigError(f"instance_fraction must be in (0, 1], got {self.instance_fraction}")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ConfigError(f"shrinkage must be in (0, 1], got {self.shrinkage}")
        if self.mode is Mode.DART:
            if self.shrinkage != 1.0:
                raise ConfigError("DART uses no shrinkage; shrinkage must be 1 in dart mode")
            if self.p_drop is None:
                raise ConfigError("dart mode needs a dropout rate (p_drop or epsilon)")
            _check_p_drop(self.p_drop)
        else:
            if self.p_drop is not None:
                raise ConfigError(f"p_drop only applies to dart mode, not {self.mode.value}")
            if self.mode is Mode.RF and self.shrinkage != 1.0:
                warnings.warn("shrinkage is ignored in rf mode", stacklevel=3)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "n_trees": self.n_trees,
            "loss": self.loss.to_dict(),
            "max_leaves": self.tree.max_leaves,
            "min_rows_per_leaf": self.tree.min_rows_per_leaf,
            "feature_fraction": self.tree.feature_fraction,
            "shrinkage": self.shrinkage,
            "p_drop": self.p_drop,
            "instance_fraction": self.instance_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        try:
            return cls(
                mode=d["mode"],
                n_trees=int(d["n_trees"]),
                loss=loss_from_dict(d["loss"]),
                tree=TreeLearnConfig(int(d["max_leaves"]), int(d["min_rows_per_leaf"]), float(d["feature_fraction"])),
                shrinkage=float(d["shrinkage"]),
                p_drop=d["p_drop"],
                instance_fraction=float(d["instance_fraction"]),
                seed=int(d["seed"]),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"incomplete trainer config: {e}") from e


def _check_p_drop(p_drop):
    if p_drop == EPSILON:
        return
    if isinstance(p_drop, str) or not 0.0 <= p_drop <= 1.0:
        raise ConfigError(f"p_drop must be in [0, 1] or {EPSILON!r}, got {p_drop!r}")


@dataclass(frozen=True)
class DropoutSet:
    indices: Tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int  # 1-based
    loss: float
    k: Optional[int]  # DART iterations >= 2 only
    dropped: Tuple[int, ...]
    seconds: float

    def tsv(self) -> str:
        k = "-" if self.k is None else str(self.k)
        return f"{self.iteration}\t{self.loss!r}\t{k}\t{self.seconds:.6f}"


def select_dropout_set(n: int, p_drop, rng: np.random.Generator) -> DropoutSet:
    """Binomial-plus-one selection over ``n`` members (or one tree in epsilon mode)."""
    if n < 1:
        raise ValueError("ensemble must have at least one member")
    _check_p_drop(p_drop)
    if p_drop == EPSILON:
        return DropoutSet((int(rng.integers(n)),))
    picked = np.flatnonzero(rng.random(n) < p_drop)
    if picked.size == 0:
        return DropoutSet((int(rng.integers(n)),))
    return DropoutSet(tuple(int(i) for i in picked))


def normalize_and_add(ensemble: Ensemble, new_tree: RegressionTree, dropped: DropoutSet) -> None:
    """Scale dropped members by k/(k+1) and append ``new_tree`` at 1/(k+1)."""
    k = dropped.k
    if any(not 0 <= i < len(ensemble) for i in dropped.indices):
        raise IndexError("dropout index out of range")
    factor = k / (k + 1)
    for i in dropped.indices:
        ensemble.members[i].weight = ensemble.members[i].weight * factor
    ensemble.append(new_tree, 1.0 / (k + 1))


def train(
    dataset: Dataset,
    config: TrainerConfig,
    progress_sink: Optional[Callable[[IterationRecord], None]] = None,
) -> Ensemble:
    check_labels(config.loss, dataset)
    n, N = dataset.n_rows, config.n_trees
    X = dataset.features
    loss = config.loss
    ens = Ensemble(
        loss,
        dataset.n_features,
        metadata={
            "mode": config.mode.value,
            "config": config.to_dict(),
            "seed": config.seed,
            "library_version": __version__,
        },
    )
    outputs = np.empty((N, n))  # unweighted training-set output of every member
    current = np.zeros(n)
    zero_targets = None

    for t in range(N):
        started = time.perf_counter()
        rows = subsample_rows(n, config.instance_fraction, substream(config.seed, Stream.INSTANCES, t))
        feature_rng = substream(config.seed, Stream.FEATURES, t)
        dropped = DropoutSet(())

        if config.mode is Mode.RF or (config.mode is Mode.DART and t == 0):
            if zero_targets is None:
                zero_targets = negative_gradient(loss, dataset, np.zeros(n))
            targets = zero_targets
        elif config.mode is Mode.MART:
            targets = negative_gradient(loss, dataset, current)
        else:
            dropped = select_dropout_set(t, config.p_drop, substream(config.seed, Stream.DROPOUT, t))
            kept = np.ones(t, dtype=bool)
            kept[list(dropped.indices)] = False
            reduced = ens.weights[kept] @ outputs[:t][kept] if kept.any() else np.zeros(n)
            targets = negative_gradient(loss, dataset, reduced)

        tree = fit_tree(dataset, targets, rows, config.tree, feature_rng)
        outputs[t] = tree.predict(X)

        if config.mode is Mode.MART:
            ens.append(tree, config.shrinkage)
            current = current + config.shrinkage * outputs[t]
        elif config.mode is Mode.DART:
            normalize_and_add(ens, tree, dropped)
            current = ens.weights @ outputs[: t + 1]
        else:
            ens.append(tree, 1.0)
            current = outputs[: t + 1].sum(axis=0) / (t + 1)

        if progress_sink is not None:
            progress_sink(
                IterationRecord(
                    iteration=t + 1,
                    loss=loss_value(loss, dataset, current),
                    k=dropped.k if config.mode is Mode.DART and t > 0 else None,
                    dropped=dropped.indices,
                    seconds=time.perf_counter() - started,
                )
            )

    if config.mode is Mode.RF:
        for m in ens.members:
            m.weight = 1.0 / N
    return ens

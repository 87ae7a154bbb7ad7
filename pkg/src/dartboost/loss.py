"""Loss functions and the negative-gradient targets each new tree fits.

``Squared`` is ``0.5 * (pred - y)**2`` so the target is the plain residual.
``Logistic`` is the sigmoid loss ``1 / (1 + exp(lam * y * pred))`` with
labels in {-1, +1}. ``LambdaRank`` has no primal loss; its target is the
LambdaMART pairwise gradient weighted by the |NDCG change| of swapping each
pair, and its reported loss is ``1 - mean NDCG@truncation``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import expit

from .data import Dataset
from .errors import ConfigError, LabelDomainError
from .metrics import mean_ndcg, ranking_order


@dataclass(frozen=True)
class Squared:
    name = "squared"

    def to_dict(self):
        return {"kind": self.name}


@dataclass(frozen=True)
class Logistic:
    lam: float = 1.0
    name = "logistic"

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"loss lambda must be > 0, got {self.lam}")

    def to_dict(self):
        return {"kind": self.name, "lambda": self.lam}


@dataclass(frozen=True)
class LambdaRank:
    lam: float = 1.0
    truncation: Optional[int] = None  # None: whole query

    name = "lambdarank"

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"loss lambda must be > 0, got {self.lam}")
        if self.truncation is not None and self.truncation < 1:
            raise ConfigError(f"NDCG truncation must be >= 1, got {self.truncation}")

    def to_dict(self):
        return {"kind": self.name, "lambda": self.lam, "truncation": self.truncation}


LossKind = Union[Squared, Logistic, LambdaRank]


def loss_from_dict(d: dict) -> LossKind:
    kind = d.get("kind")
    if kind == "squared":
        return Squared()
    if kind == "logistic":
        return Logistic(float(d["lambda"]))
    if kind == "lambdarank":
        trunc = d.get("truncation")
        return LambdaRank(float(d["lambda"]), None if trunc is None else int(trunc))
    raise ConfigError(f"unknown loss kind {kind!r}")


def make_loss(kind: str, lam: float = 1.0, truncation: Optional[int] = None) -> LossKind:
    if kind == "squared":
        return Squared()
    if kind == "logistic":
        return Logistic(lam)
    if kind == "lambdarank":
        return LambdaRank(lam, truncation)
    raise ConfigError(f"unknown loss {kind!r}; expected squared, logistic or lambdarank")


def check_labels(loss: LossKind, dataset: Dataset) -> None:
    """Raise unless the dataset's labels fit the loss's label domain."""
    if isinstance(loss, Logistic):
        y = dataset.labels
        bad = (y != 1.0) & (y != -1.0)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise LabelDomainError(f"logistic loss needs labels in {{-1, +1}}; row {i} has {y[i]!r}")
    elif isinstance(loss, LambdaRank):
        if dataset.query_groups is None:
            raise LabelDomainError("lambdarank loss needs query groups (qid)")
        dataset.check_relevance_grades()


def _check(loss, dataset, predictions):
    p = np.asarray(predictions, dtype=np.float64)
    if p.shape != (dataset.n_rows,):
        raise ValueError(f"predictions length {p.shape} does not match {dataset.n_rows} rows")
    check_labels(loss, dataset)
    return p


def pointwise_loss(loss: LossKind, labels, predictions) -> np.ndarray:
    """Per-point loss for ``Squared`` and ``Logistic``."""
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(predictions, dtype=np.float64)
    if isinstance(loss, Squared):
        return 0.5 * (p - y) ** 2
    if isinstance(loss, Logistic):
        return expit(-loss.lam * y * p)
    raise TypeError(f"{type(loss).__name__} has no pointwise loss")


def pointwise_negative_gradient(loss: LossKind, labels, predictions) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(predictions, dtype=np.float64)
    if isinstance(loss, Squared):
        return y - p
    if isinstance(loss, Logistic):
        z = loss.lam * y * p
        # e^z / (1 + e^z)^2 == sigmoid(z) * sigmoid(-z), stable for large |z|
        return loss.lam * y * expit(z) * expit(-z)
    raise TypeError(f"{type(loss).__name__} has no pointwise gradient")


def _lambdarank_query(rel, scores, lam, truncation):
    n = len(rel)
    out = np.zeros(n)
    if n < 2:
        return out
    k = n if truncation is None else min(truncation, n)
    rank = np.empty(n, dtype=np.int64)
    rank[ranking_order(scores)] = np.arange(n)
    disc = np.where(rank < k, 1.0 / np.log2(rank + 2.0), 0.0)
    gain = 2.0 ** rel - 1.0
    ideal = np.sort(gain)[::-1][:k]
    idcg = float(np.sum(ideal / np.log2(np.arange(2, k + 2))))
    if idcg == 0.0:
        return out
    higher = rel[:, None] > rel[None, :]
    delta = np.abs((gain[:, None] - gain[None, :]) * (disc[:, None] - disc[None, :])) / idcg
    rho = lam * expit(-lam * (scores[:, None] - scores[None, :]))
    contrib = np.where(higher, delta * rho, 0.0)
    # row i pushes doc i up by its pairs below; column j pushes doc j down
    return contrib.sum(axis=1) - contrib.sum(axis=0)


def negative_gradient(loss: LossKind, dataset: Dataset, predictions) -> np.ndarray:
    """Targets ``-L'_x(prediction)`` for every row of ``dataset``."""
    p = _check(loss, dataset, predictions)
    if isinstance(loss, LambdaRank):
        out = np.empty(dataset.n_rows)
        for sl in dataset.query_groups.slices():
            out[sl] = _lambdarank_query(dataset.labels[sl], p[sl], loss.lam, loss.truncation)
        return out
    return pointwise_negative_gradient(loss, dataset.labels, p)


def loss_value(loss: LossKind, dataset: Dataset, predictions) -> float:
    """Mean per-point loss; for ``LambdaRank`` the surrogate ``1 - mean NDCG``."""
    p = _check(loss, dataset, predictions)
    if isinstance(loss, LambdaRank):
        return max(0.0, 1.0 - mean_ndcg(dataset.labels, p, dataset.query_groups, loss.truncation))
    return float(np.mean(pointwise_loss(loss, dataset.labels, p)))

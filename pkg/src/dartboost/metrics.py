"""Evaluation metrics.

NDCG uses exponential gain ``2**rel - 1`` and the ``1 / log2(rank + 1)``
discount. A query whose ideal DCG is zero (every grade 0) scores 1.0.
Ties in score are broken by original document order.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np

from .data import MAX_RELEVANCE, QueryGroups


class RankedQuery(NamedTuple):
    relevances: np.ndarray
    scores: np.ndarray


def _check_query(relevances, scores):
    rel = np.asarray(relevances)
    s = np.asarray(scores, dtype=np.float64)
    if rel.ndim != 1 or rel.shape != s.shape or len(rel) == 0:
        raise ValueError("relevances and scores must be equal-length, non-empty vectors")
    if np.any((rel < 0) | (rel > MAX_RELEVANCE) | (rel != np.round(rel))):
        raise ValueError(f"relevance grades must be integers in [0, {MAX_RELEVANCE}]")
    return rel.astype(np.int64), s


def ranking_order(scores) -> np.ndarray:
    """Document indices by descending score, ties by ascending index."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def _dcg(grades_in_rank_order, k) -> float:
    total = 0.0
    for pos, g in enumerate(grades_in_rank_order[:k], start=1):
        total += (2.0 ** int(g) - 1.0) / math.log2(pos + 1)
    return total


def _ndcg_of_order(rel, order, k) -> float:
    ideal = _dcg(sorted(rel.tolist(), reverse=True), k)
    if ideal == 0.0:
        return 1.0
    return _dcg(rel[order].tolist(), k) / ideal


def ndcg_at_k(relevances, scores, k: Optional[int] = None) -> float:
    """NDCG@k of one query; ``k=None`` means untruncated."""
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    rel, s = _check_query(relevances, scores)
    k = len(rel) if k is None else k
    return _ndcg_of_order(rel, ranking_order(s), k)


def ndcg_swap_delta(relevances, scores, i: int, j: int, k: Optional[int] = None) -> float:
    """|NDCG@k change| from exchanging the rank positions of docs ``i`` and ``j``."""
    rel, s = _check_query(relevances, scores)
    n = len(rel)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise IndexError(f"invalid document pair ({i}, {j}) for a query of {n} docs")
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    k = n if k is None else k
    order = ranking_order(s)
    swapped = order.copy()
    pi, pj = np.flatnonzero(order == i)[0], np.flatnonzero(order == j)[0]
    swapped[pi], swapped[pj] = j, i
    return abs(_ndcg_of_order(rel, order, k) - _ndcg_of_order(rel, swapped, k))


def mean_ndcg(labels, scores, groups: QueryGroups, k: Optional[int] = None) -> float:
    """Average NDCG@k over queries, in query order."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    vals = [ndcg_at_k(labels[sl], scores[sl], k) for sl in groups.slices()]
    return float(sum(vals) / len(vals))


def _check_pair(labels, predictions):
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(predictions, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    if y.size == 0:
        raise ValueError("empty input")
    return y, p


def mse(labels, predictions) -> float:
    y, p = _check_pair(labels, predictions)
    return float(np.mean((p - y) ** 2))


def rmse(labels, predictions) -> float:
    return math.sqrt(mse(labels, predictions))


def predict_labels(scores) -> np.ndarray:
    """Classification rule: +1 when the score is >= 0, else -1."""
    return np.where(np.asarray(scores, dtype=np.float64) >= 0.0, 1.0, -1.0)


def accuracy_and_recall(labels, predictions) -> dict:
    """Accuracy and recall of the positive class.

    ``recall`` is ``None`` when there are no positive labels.
    """
    y, p = _check_pair(labels, predictions)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("classification labels must be -1 or +1")
    yhat = predict_labels(p)
    positives = y == 1.0
    recall = None
    if positives.any():
        recall = float(np.mean(yhat[positives] == 1.0))
    return {"accuracy": float(np.mean(yhat == y)), "recall": recall}

"""Leaf-wise L2 regression trees.

A tree is grown best-first: the frontier leaf whose best split removes the
most squared error is split next, until the leaf budget is spent or no
split helps. Split search walks each feature's rows in sorted order with
running sums, so one scan is linear in the leaf size. Every leaf keeps one
row ordering per feature; splitting a leaf partitions those orderings
stably, so nothing is re-sorted below the root.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import ConfigError, FeatureMismatchError, ModelFormatError

# Gains within this relative distance count as tied; the tie then goes to
# the smaller feature index / smaller threshold. Without it, rounding noise
# (e.g. from a constant shift of the targets) could flip equivalent choices.
_TIE_RTOL = 1e-10
# Gains below (_NOISE * max|target|)**2 * n_rows are rounding noise.
_NOISE = 1e-12


@dataclass(frozen=True)
class TreeLearnConfig:
    max_leaves: int = 32
    min_rows_per_leaf: int = 1
    feature_fraction: float = 1.0

    def __post_init__(self):
        if int(self.max_leaves) != self.max_leaves or self.max_leaves < 1:
            raise ConfigError(f"max_leaves must be a positive integer, got {self.max_leaves}")
        if int(self.min_rows_per_leaf) != self.min_rows_per_leaf or self.min_rows_per_leaf < 1:
            raise ConfigError(f"min_rows_per_leaf must be a positive integer, got {self.min_rows_per_leaf}")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ConfigError(f"feature_fraction must be in (0, 1], got {self.feature_fraction}")

    def n_scanned(self, n_features: int) -> int:
        return max(1, min(n_features, math.ceil(self.feature_fraction * n_features - 1e-9)))


@dataclass(frozen=True)
class Split:
    threshold: float
    gain: float
    left_rows: np.ndarray
    right_rows: np.ndarray
    feature: int = 0


def _midpoint(a: float, b: float) -> float:
    m = 0.5 * (a + b)
    if not math.isfinite(m):
        m = 0.5 * a + 0.5 * b
    # adjacent doubles: the midpoint may round up onto b, which would then route left
    return m if a <= m < b else a


def _scan(xs: np.ndarray, ts: np.ndarray, min_leaf: int, floor: float):
    """Best (row, position, gain) over features laid out as rows of ``xs``.

    ``xs`` holds each candidate feature's values in ascending order and
    ``ts`` the matching (centred) targets. Position ``p`` puts the first
    ``p + 1`` entries on the left.
    """
    nf, m = xs.shape
    if m < 2 * min_leaf:
        return None
    cs = np.cumsum(ts, axis=1)
    total = cs[:, -1:]
    left_sum = cs[:, :-1]
    nl = np.arange(1, m, dtype=np.float64)
    nr = m - nl
    diff = left_sum / nl - (total - left_sum) / nr
    gain = (nl * nr / m) * diff * diff
    valid = xs[:, 1:] > xs[:, :-1]
    valid[:, : min_leaf - 1] = False
    valid[:, m - min_leaf :] = False
    gain = np.where(valid, gain, -np.inf)
    per_feature = gain.max(axis=1)

    best = None
    for f in range(nf):
        g = per_feature[f]
        if not g > floor:
            continue
        if best is None or g > best[2] * (1.0 + _TIE_RTOL):
            best = (f, None, g)
    if best is None:
        return None
    f, _, g = best
    p = int(np.flatnonzero(gain[f] >= g * (1.0 - _TIE_RTOL))[0])
    return f, p, float(gain[f, p])


def find_best_split(feature_values, targets, min_rows_per_leaf: int = 1) -> Optional[Split]:
    """Best SSE-reducing threshold on one feature, or ``None``.

    Returned row sets index into the given vectors.
    """
    x = np.asarray(feature_values, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if x.shape != t.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {t.shape}")
    if len(x) < 2:
        raise ValueError("need at least two rows")
    order = np.argsort(x, kind="stable")
    floor = len(t) * (_NOISE * float(np.max(np.abs(t)))) ** 2
    found = _scan(x[order][None, :], (t - t.mean())[order][None, :], min_rows_per_leaf, floor)
    if found is None:
        return None
    _, p, gain = found
    xs = x[order]
    thr = _midpoint(float(xs[p]), float(xs[p + 1]))
    go_left = x <= thr
    return Split(thr, gain, np.flatnonzero(go_left), np.flatnonzero(~go_left))


class RegressionTree:
    """Binary tree stored as parallel node arrays.

    ``feature[i] == -1`` marks a leaf. ``coverage[i]`` is the fraction of
    training rows that reached node ``i`` (NaN when unknown). The root is
    node 0. Rows with ``x[feature] <= threshold`` go left.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "coverage", "n_features")

    def __init__(self, feature, threshold, left, right, value, coverage, n_features):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.coverage = np.asarray(coverage, dtype=np.float64)
        self.n_features = int(n_features)
        for a in (self.feature, self.threshold, self.left, self.right, self.value, self.coverage):
            a.setflags(write=False)
        self._validate()

    def _validate(self):
        n = len(self.feature)
        if n == 0:
            raise ModelFormatError("tree has no nodes")
        arrays = (self.threshold, self.left, self.right, self.value, self.coverage)
        if any(len(a) != n for a in arrays):
            raise ModelFormatError("node arrays differ in length")
        internal = self.feature >= 0
        if np.any(self.feature[internal] >= self.n_features) or np.any(self.feature < -1):
            raise ModelFormatError("split feature index out of range")
        if not np.all(np.isfinite(self.threshold[internal])):
            raise ModelFormatError("non-finite threshold")
        if not np.all(np.isfinite(self.value[~internal])):
            raise ModelFormatError("non-finite leaf value")
        children = np.concatenate([self.left[internal], self.right[internal]])
        if np.any((children <= 0) | (children >= n)):
            raise ModelFormatError("child index out of range")
        if len(np.unique(children)) != len(children) or len(children) != n - 1:
            raise ModelFormatError("nodes do not form a binary tree")
        # each non-root node has exactly one parent; reachability rules out cycles
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        while stack:
            i = stack.pop()
            seen[i] = True
            if internal[i]:
                stack.extend((int(self.left[i]), int(self.right[i])))
        if not seen.all():
            raise ModelFormatError("unreachable nodes in tree")

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def apply(self, X) -> np.ndarray:
        """Leaf node index reached by each row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise FeatureMismatchError(self.n_features, X.shape[-1] if X.ndim else 0)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.arange(X.shape[0])
        while active.size:
            nd = node[active]
            f = self.feature[nd]
            keep = f >= 0
            active, nd, f = active[keep], nd[keep], f[keep]
            go_left = X[active, f] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
        return node

    def predict(self, X):
        """Leaf values for a matrix of rows, or a float for a single row."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return float(self.value[self.apply(X[None, :])[0]])
        return self.value[self.apply(X)]

    def node_coverage(self) -> np.ndarray:
        """Coverage of every node, internal nodes summing their leaves."""
        cov = self.coverage.copy()
        order = []
        stack = [0]
        while stack:
            i = stack.pop()
            order.append(i)
            if self.feature[i] >= 0:
                stack.extend((int(self.left[i]), int(self.right[i])))
        for i in reversed(order):
            if self.feature[i] >= 0:
                cov[i] = cov[self.left[i]] + cov[self.right[i]]
        return cov

    def to_nodes(self) -> list:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                nodes.append(
                    {"f": int(self.feature[i]), "t": float(self.threshold[i]),
                     "l": int(self.left[i]), "r": int(self.right[i])}
                )
            else:
                leaf = {"v": float(self.value[i])}
                if not math.isnan(self.coverage[i]):
                    leaf["c"] = float(self.coverage[i])
                nodes.append(leaf)
        return nodes

    @classmethod
    def from_nodes(cls, nodes: list, n_features: int) -> "RegressionTree":
        n = len(nodes)
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros(n)
        coverage = np.full(n, np.nan)
        try:
            for i, nd in enumerate(nodes):
                if "f" in nd:
                    feature[i], threshold[i] = int(nd["f"]), float(nd["t"])
                    left[i], right[i] = int(nd["l"]), int(nd["r"])
                else:
                    value[i] = float(nd["v"])
                    if "c" in nd:
                        coverage[i] = float(nd["c"])
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed node: {e}") from e
        return cls(feature, threshold, left, right, value, coverage, n_features)

    def structure_equal(self, other: "RegressionTree") -> bool:
        return (
            np.array_equal(self.feature, other.feature)
            and np.array_equal(self.threshold, other.threshold)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
        )

    def __repr__(self):
        return f"RegressionTree(n_leaves={self.n_leaves}, n_features={self.n_features})"


def constant_tree(value: float, n_features: int, coverage: float = 1.0) -> RegressionTree:
    return RegressionTree([-1], [0.0], [-1], [-1], [value], [coverage], n_features)


def fit_tree(
    dataset: Dataset,
    targets,
    rows,
    config: TreeLearnConfig,
    rng: Optional[np.random.Generator] = None,
) -> RegressionTree:
    """Fit a leaf-wise tree to ``targets`` restricted to ``rows``.

    Leaf values are target means. Each leaf draws its own random subset of
    ``config.n_scanned(n_features)`` features from ``rng``.
    """
    X = dataset.features
    n, F = X.shape
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (n,):
        raise ValueError(f"targets length {targets.shape} does not match {n} rows")
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("rows must be non-empty")
    n_scan = config.n_scanned(F)
    if n_scan < F and rng is None:
        raise ValueError("feature subsampling needs an rng")
    min_leaf = config.min_rows_per_leaf

    rows = np.sort(rows)
    if rows.size == n:
        root_sorted = dataset.sorted_index
    else:
        member = np.zeros(n, dtype=bool)
        member[rows] = True
        S = dataset.sorted_index
        root_sorted = S[member[S]].reshape(F, rows.size)
    n_sub = float(rows.size)

    feature, threshold, left, right, value, coverage = [], [], [], [], [], []
    pending = {}  # leaf node id -> (rows, per-feature orderings, split)
    heap = []

    def add_leaf(leaf_rows, orderings, evaluate):
        node = len(feature)
        t = targets[leaf_rows]
        # shifting by the first target makes constant leaves exact
        mean = float(t[0] + np.mean(t - t[0]))
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(mean)
        coverage.append(leaf_rows.size / n_sub)
        if not evaluate or leaf_rows.size < 2 * min_leaf:
            return
        if n_scan < F:
            feats = np.sort(rng.choice(F, size=n_scan, replace=False))
        else:
            feats = np.arange(F)
        sub = orderings[feats]
        xs = X[sub, feats[:, None]]
        ts = targets[sub] - mean
        floor = leaf_rows.size * (_NOISE * float(np.max(np.abs(t)))) ** 2
        found = _scan(xs, ts, min_leaf, floor)
        if found is None:
            return
        fi, p, gain = found
        f = int(feats[fi])
        thr = _midpoint(float(xs[fi, p]), float(xs[fi, p + 1]))
        pending[node] = (leaf_rows, orderings, f, thr)
        heapq.heappush(heap, (-gain, node))

    add_leaf(rows, root_sorted, config.max_leaves > 1)
    n_leaves = 1
    while heap and n_leaves < config.max_leaves:
        _, node = heapq.heappop(heap)
        leaf_rows, orderings, f, thr = pending.pop(node)
        goes_left = np.zeros(n, dtype=bool)
        goes_left[leaf_rows[X[leaf_rows, f] <= thr]] = True
        flags = goes_left[orderings]
        n_left = int(goes_left[leaf_rows].sum())
        lrows = leaf_rows[goes_left[leaf_rows]]
        rrows = leaf_rows[~goes_left[leaf_rows]]
        lord = orderings[flags].reshape(F, n_left)
        rord = orderings[~flags].reshape(F, leaf_rows.size - n_left)
        n_leaves += 1
        more = n_leaves < config.max_leaves
        feature[node], threshold[node] = f, thr
        left[node] = len(feature)
        add_leaf(lrows, lord, more)
        right[node] = len(feature)
        add_leaf(rrows, rord, more)
        value[node] = 0.0
        coverage[node] = math.nan

    return RegressionTree(feature, threshold, left, right, value, coverage, F)

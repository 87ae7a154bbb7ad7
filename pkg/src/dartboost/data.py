"""Datasets and their loaders.

A :class:`Dataset` is a dense float64 feature matrix plus labels and, for
ranking, the contiguous query blocks the rows belong to. Datasets are
read-only once built; the arrays are flagged non-writeable.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataFormatError, LabelDomainError

MAX_RELEVANCE = 31


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QueryGroups:
    """Contiguous row blocks; group ``i`` spans ``[offsets[i], offsets[i+1])``."""

    offsets: np.ndarray
    qids: Optional[tuple] = None

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=np.int64)
        if offsets.ndim != 1 or len(offsets) < 2:
            raise DataFormatError("query offsets need at least two entries")
        if offsets[0] != 0:
            raise DataFormatError("query offsets must start at 0")
        if np.any(np.diff(offsets) <= 0):
            raise DataFormatError("query offsets must be strictly increasing (no empty groups)")
        if self.qids is not None and len(self.qids) != len(offsets) - 1:
            raise DataFormatError("one query id per group required")
        object.__setattr__(self, "offsets", _frozen(offsets.copy()))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], qids=None) -> "QueryGroups":
        return cls(np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64), qids)

    @property
    def n_groups(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_rows(self) -> int:
        return int(self.offsets[-1])

    def slices(self):
        for lo, hi in zip(self.offsets[:-1], self.offsets[1:]):
            yield slice(int(lo), int(hi))

    def row_group(self) -> np.ndarray:
        """Group index of every row."""
        return np.repeat(np.arange(self.n_groups), np.diff(self.offsets))

    def __eq__(self, other):
        if not isinstance(other, QueryGroups):
            return NotImplemented
        return np.array_equal(self.offsets, other.offsets) and self.qids == other.qids

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    query_groups: Optional[QueryGroups] = None
    feature_names: Optional[tuple] = None
    # Entity ids used only for grouped cross-validation; never a feature.
    entity_ids: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, order="C")
        y = np.array(self.labels, dtype=np.float64)
        if X.ndim != 2:
            raise DataFormatError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataFormatError(f"labels length {y.shape} does not match {X.shape[0]} rows")
        if X.shape[0] == 0:
            raise DataFormatError("no data rows")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DataFormatError("non-finite feature value", line=int(r), column=int(c))
        if not np.all(np.isfinite(y)):
            raise DataFormatError("non-finite label", line=int(np.flatnonzero(~np.isfinite(y))[0]))
        if self.query_groups is not None and self.query_groups.n_rows != X.shape[0]:
            raise DataFormatError("query groups do not cover every row exactly once")
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != X.shape[1]:
                raise DataFormatError("feature_names length must equal n_features")
            object.__setattr__(self, "feature_names", names)
        if self.entity_ids is not None:
            ids = np.asarray(self.entity_ids)
            if ids.shape != (X.shape[0],):
                raise DataFormatError("entity_ids length must equal n_rows")
            object.__setattr__(self, "entity_ids", _frozen(ids.copy()))
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @cached_property
    def sorted_index(self) -> np.ndarray:
        """Per-feature row order, shape ``(n_features, n_rows)``; ties keep row order."""
        return _frozen(np.argsort(self.features, axis=0, kind="stable").T.copy())

    def check_relevance_grades(self) -> None:
        y = self.labels
        bad = (y != np.round(y)) | (y < 0) | (y > MAX_RELEVANCE)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise LabelDomainError(
                f"relevance grade {y[i]!r} at row {i} is not an integer in [0, {MAX_RELEVANCE}]"
            )

    def take(self, rows) -> "Dataset":
        """Sub-dataset of ``rows`` (kept in the given order).

        Query groups survive only when ``rows`` keeps whole groups together
        as contiguous blocks.
        """
        rows = np.asarray(rows, dtype=np.int64)
        groups = None
        if self.query_groups is not None:
            gid = self.query_groups.row_group()[rows]
            change = np.flatnonzero(np.diff(gid)) + 1
            starts = np.concatenate([[0], change])
            sizes = np.diff(np.concatenate([starts, [len(rows)]]))
            full = np.diff(self.query_groups.offsets)[gid[starts]]
            if len(np.unique(gid[starts])) != len(starts) or np.any(sizes != full):
                raise DataFormatError("row selection splits a query group")
            qids = None
            if self.query_groups.qids is not None:
                qids = tuple(self.query_groups.qids[g] for g in gid[starts])
            groups = QueryGroups.from_sizes(sizes, qids)
        return Dataset(
            self.features[rows],
            self.labels[rows],
            groups,
            self.feature_names,
            None if self.entity_ids is None else self.entity_ids[rows],
        )


def _parse_real(text: str, line: int, column) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric value {text!r}", line=line, column=column) from None
    if not math.isfinite(v):
        raise DataFormatError(f"non-finite value {text!r}", line=line, column=column)
    return v


def load_csv(
    path: Union[str, os.PathLike],
    label_column: Union[str, int] = -1,
    has_header: bool = True,
    group_column: Union[str, int, None] = None,
) -> Dataset:
    """Load a comma-separated file.

    ``label_column`` (and ``group_column``) may be a header name or a
    column index; negative indices count from the end. Line numbers in
    errors are 1-based file lines.
    """
    try:
        with open(path, newline="") as fh:
            records = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    except OSError as e:
        raise DataFormatError(f"cannot read {path}: {e.strerror or e}") from e
    except csv.Error as e:
        raise DataFormatError(f"malformed CSV: {e}") from e

    header = None
    if has_header and records:
        header = [c.strip() for c in records[0][1]]
        records = records[1:]
    if not records:
        raise DataFormatError("no data rows")

    width = len(header) if header is not None else len(records[0][1])

    def resolve(col, what):
        if isinstance(col, str) and not col.lstrip("-").isdigit():
            if header is None or col not in header:
                raise DataFormatError(f"{what} column {col!r} not found")
            return header.index(col)
        idx = int(col)
        if not -width <= idx < width:
            raise DataFormatError(f"{what} column index {idx} out of range for {width} columns")
        return idx % width

    label_idx = resolve(label_column, "label")
    group_idx = resolve(group_column, "group") if group_column is not None else None
    if group_idx == label_idx:
        raise DataFormatError("group column cannot also be the label column")
    feat_cols = [c for c in range(width) if c not in (label_idx, group_idx)]

    X = np.empty((len(records), len(feat_cols)))
    y = np.empty(len(records))
    groups = [] if group_idx is not None else None
    for r, (lineno, rec) in enumerate(records):
        if len(rec) != width:
            raise DataFormatError(f"expected {width} fields, found {len(rec)}", line=lineno)
        y[r] = _parse_real(rec[label_idx].strip(), lineno, label_idx + 1)
        for j, c in enumerate(feat_cols):
            X[r, j] = _parse_real(rec[c].strip(), lineno, c + 1)
        if groups is not None:
            groups.append(rec[group_idx].strip())

    names = tuple(header[c] for c in feat_cols) if header is not None else None
    return Dataset(X, y, feature_names=names, entity_ids=np.array(groups) if groups is not None else None)


def load_svmlight(path: Union[str, os.PathLike], expect_qid: bool = False) -> Dataset:
    """Load ``<label> [qid:<q>] <idx>:<val> ...`` lines (1-based indices).

    With ``expect_qid`` every line needs a qid and equal qids must be
    contiguous; they become the dataset's query groups. Otherwise qid
    tokens are accepted and ignored.
    """
    labels, rows, qids = [], [], []
    n_features = 0
    try:
        fh = open(path)
    except OSError as e:
        raise DataFormatError(f"cannot read {path}: {e.strerror or e}") from e
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            labels.append(_parse_real(tokens[0], lineno, 1))
            pos = 1
            qid = None
            if pos < len(tokens) and tokens[pos].startswith("qid:"):
                q = tokens[pos][4:]
                if not q or not q.lstrip("-").isdigit():
                    raise DataFormatError(f"malformed token {tokens[pos]!r}", line=lineno)
                qid = int(q)
                pos += 1
            if expect_qid and qid is None:
                raise DataFormatError("missing qid", line=lineno)
            qids.append(qid)
            entries = {}
            last = 0
            for tok in tokens[pos:]:
                idx_text, sep, val_text = tok.partition(":")
                if not sep or not idx_text.isdigit():
                    raise DataFormatError(f"malformed token {tok!r}", line=lineno)
                idx = int(idx_text)
                if idx < 1:
                    raise DataFormatError(f"feature index must be >= 1 in token {tok!r}", line=lineno)
                if idx <= last:
                    raise DataFormatError(f"feature indices not strictly increasing at token {tok!r}", line=lineno)
                try:
                    val = float(val_text)
                except ValueError:
                    raise DataFormatError(f"malformed token {tok!r}", line=lineno) from None
                if not math.isfinite(val):
                    raise DataFormatError(f"non-finite value in token {tok!r}", line=lineno)
                entries[idx - 1] = val
                last = idx
            n_features = max(n_features, last)
            rows.append(entries)

    if not rows:
        raise DataFormatError("no data rows")
    X = np.zeros((len(rows), n_features))
    for r, entries in enumerate(rows):
        for j, v in entries.items():
            X[r, j] = v

    groups = None
    if expect_qid:
        sizes, order, seen = [], [], set()
        for q in qids:
            if order and order[-1] == q:
                sizes[-1] += 1
                continue
            if q in seen:
                raise DataFormatError(f"non-contiguous query id {q}")
            seen.add(q)
            order.append(q)
            sizes.append(1)
        groups = QueryGroups.from_sizes(sizes, tuple(order))
    return Dataset(X, np.array(labels), groups)


def save_svmlight(dataset: Dataset, path: Union[str, os.PathLike]) -> None:
    """Write every feature explicitly; reals use shortest round-trip repr."""
    qid_of_row = None
    if dataset.query_groups is not None:
        qg = dataset.query_groups
        ids = qg.qids if qg.qids is not None else tuple(range(1, qg.n_groups + 1))
        qid_of_row = [ids[g] for g in qg.row_group()]
    with open(path, "w") as fh:
        for r in range(dataset.n_rows):
            parts = [repr(float(dataset.labels[r]))]
            if qid_of_row is not None:
                parts.append(f"qid:{qid_of_row[r]}")
            parts.extend(f"{j + 1}:{float(v)!r}" for j, v in enumerate(dataset.features[r]))
            fh.write(" ".join(parts) + "\n")


def subsample_rows(dataset_size: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted row indices drawn without replacement; never empty."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return np.arange(dataset_size, dtype=np.int64)
    m = max(1, min(dataset_size, math.floor(fraction * dataset_size + 0.5)))
    return np.sort(rng.choice(dataset_size, size=m, replace=False)).astype(np.int64)

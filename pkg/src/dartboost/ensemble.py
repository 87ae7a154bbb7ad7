"""Weighted additive tree ensembles and their JSON model files.

Prediction is ``sum_i weight_i * tree_i(x)`` accumulated strictly in
member order, so a given model always produces bit-identical scores.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

from .errors import FeatureMismatchError, ModelFormatError, SchemaVersionError
from .loss import LossKind, loss_from_dict
from .tree import RegressionTree

SCHEMA_VERSION = 1


@dataclass
class Member:
    tree: RegressionTree
    weight: float


@dataclass
class Ensemble:
    loss: LossKind
    n_features: int
    members: List[Member] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.members], dtype=np.float64)

    def append(self, tree: RegressionTree, weight: float) -> None:
        if tree.n_features != self.n_features:
            raise FeatureMismatchError(self.n_features, tree.n_features)
        if not (weight > 0 and math.isfinite(weight)):
            raise ValueError(f"member weight must be positive and finite, got {weight}")
        self.members.append(Member(tree, float(weight)))

    def _rows(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise FeatureMismatchError(self.n_features, X.shape[-1])
        return X, single

    def predict_subset(self, X, kept: Iterable[int]):
        """Weighted sum over the ``kept`` members only, in member order."""
        X, single = self._rows(X)
        kept = sorted(set(int(i) for i in kept))
        if kept and (kept[0] < 0 or kept[-1] >= len(self.members)):
            raise IndexError(f"member index out of range for an ensemble of {len(self.members)}")
        out = np.zeros(X.shape[0])
        for i in kept:
            m = self.members[i]
            out = out + m.weight * m.tree.predict(X)
        return float(out[0]) if single else out

    def predict(self, X):
        """Ensemble score for a row (returns float) or a matrix of rows."""
        return self.predict_subset(X, range(len(self.members)))

    def tree_outputs(self, X) -> np.ndarray:
        """Unweighted per-member outputs, shape ``(n_members, n_rows)``."""
        X, _ = self._rows(X)
        return np.array([m.tree.predict(X) for m in self.members]).reshape(len(self.members), X.shape[0])

    # -- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "loss": self.loss.to_dict(),
            "n_features": self.n_features,
            "metadata": self.metadata,
            "members": [{"weight": m.weight, "nodes": m.tree.to_nodes()} for m in self.members],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Ensemble":
        if not isinstance(doc, dict):
            raise ModelFormatError("model document must be a JSON object")
        if "schema_version" not in doc:
            raise ModelFormatError("missing schema_version")
        if doc["schema_version"] != SCHEMA_VERSION:
            raise SchemaVersionError(doc["schema_version"], SCHEMA_VERSION)
        try:
            n_features = int(doc["n_features"])
            loss = loss_from_dict(doc["loss"])
            members_doc = doc["members"]
            metadata = doc.get("metadata", {})
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed model document: {e}") from e
        ens = cls(loss, n_features, metadata=metadata)
        for k, md in enumerate(members_doc):
            try:
                w = float(md["weight"])
                nodes = md["nodes"]
            except (KeyError, TypeError, ValueError) as e:
                raise ModelFormatError(f"malformed member {k}: {e}") from e
            if not (w > 0 and math.isfinite(w)):
                raise ModelFormatError(f"nonpositive weight at member {k}")
            if not isinstance(nodes, list):
                raise ModelFormatError(f"member {k}: nodes must be a list")
            try:
                tree = RegressionTree.from_nodes(nodes, n_features)
            except ModelFormatError as e:
                raise ModelFormatError(f"member {k}: {e}") from e
            ens.members.append(Member(tree, w))
        return ens

    @classmethod
    def loads(cls, text: str) -> "Ensemble":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"model file is not valid JSON: {e}") from e
        return cls.from_dict(doc)


def save(ensemble: Ensemble, path) -> None:
    """Write the model atomically (temp file + rename)."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(ensemble.dumps())
    os.replace(tmp, path)


def load(path) -> Ensemble:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ModelFormatError(f"cannot read model {path}: {e.strerror or e}") from e
    return Ensemble.loads(text)

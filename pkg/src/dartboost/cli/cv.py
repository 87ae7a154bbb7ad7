"""Grouped k-fold assignment."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..rng import derive_seed


def grouped_folds(groups, n_folds: int, seed: int) -> np.ndarray:
    """Fold index per row; rows sharing a group always share a fold.

    Distinct groups are shuffled with a seeded generator and dealt out
    round-robin, so fold sizes differ by at most one group.
    """
    if n_folds < 2:
        raise ConfigError(f"need at least 2 folds, got {n_folds}")
    groups = np.asarray(groups)
    uniq, inverse = np.unique(groups, return_inverse=True)
    if n_folds > len(uniq):
        raise ConfigError(f"{n_folds} folds requested but only {len(uniq)} groups")
    rng = np.random.default_rng(derive_seed(seed, 0xC5))
    fold_of_group = np.empty(len(uniq), dtype=np.int64)
    fold_of_group[rng.permutation(len(uniq))] = np.arange(len(uniq)) % n_folds
    return fold_of_group[inverse]

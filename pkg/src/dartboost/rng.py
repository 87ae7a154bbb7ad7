"""Seeded random substreams.

Each randomized component of training draws from its own stream, keyed by
``(seed, stream, iteration)``. Turning one component on or off (say, the
instance subsample) therefore never shifts the numbers another component
sees.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    DROPOUT = 0
    INSTANCES = 1
    FEATURES = 2


def substream(seed: int, stream: Stream, iteration: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(stream), int(iteration)))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Child 64-bit seed for ``key`` (e.g. a sweep combination index)."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])

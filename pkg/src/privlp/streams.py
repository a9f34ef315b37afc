"""Seeded random streams.

Every stream is a Philox (counter-based, 64-bit keyed) generator seeded by a
``SeedSequence`` whose spawn key is the logical address of the task, e.g.
``(grid_index, trial_index, purpose)``. The same address always yields the
same stream, independent of execution order.
"""
from __future__ import annotations

import numpy as np

INSTANCE = 0
NOISE = 1


def stream(master_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))

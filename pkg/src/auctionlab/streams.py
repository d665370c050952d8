"""Deterministic per-task random streams.

Every stream is derived from the master seed plus a structural key, so
results never depend on worker count or scheduling order.
"""
from __future__ import annotations

import numpy as np

TAG_BIDS = 0
TAG_TAU_STAR = 1
TAG_CELL = 2
TAG_MISC = 3


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)

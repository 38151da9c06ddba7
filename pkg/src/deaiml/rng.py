"""Deterministic per-task random streams.

Every stochastic task (bootstrap replicate, CV fold, boosting round) draws
from ``stream(seed, *keys)``, so results do not depend on execution order or
on how work is split across processes.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def stream(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys)))


def child_seed(seed: int, *keys) -> int:
    """An integer seed derived from ``stream(seed, *keys)``, for APIs that take a seed."""
    return int(stream(seed, *keys).integers(2 ** 62))

"""Seeded random substreams.

Every unit of stochastic work (a Monte Carlo chunk, a batch of attack trials)
draws from its own generator built from ``SeedSequence((seed, index))``. The
stream therefore depends only on the seed and the unit index, never on which
worker ran the unit or in what order.
"""

from __future__ import annotations

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

MAX_SEED = 2**64 - 1


def substream(seed: int, index: int) -> Generator:
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(PCG64(SeedSequence((int(seed), int(index)))))


def chunk_bounds(total: int, chunk: int) -> list[tuple[int, int, int]]:
    """Split ``total`` trials into (index, start, size) units of ``chunk``."""
    chunk = max(1, int(chunk))
    return [
        (k, start, min(chunk, total - start))
        for k, start in enumerate(range(0, total, chunk))
    ]

"""
Counter-based random streams.

Every random number in gaussglass comes from a Philox generator whose key is
derived from ``(seed, purpose, index, ...)`` through ``SeedSequence`` spawn keys.
Two draws with the same path are bit-identical no matter which worker process
produces them, and distinct paths are statistically independent.
"""

from enum import IntEnum

import numpy as np

UINT64_MAX = 2**64 - 1


class Purpose(IntEnum):
    """Top-level stream families."""
    DISORDER = 0
    DISORDER_PRIME = 1      # J' of the superadditivity interpolation
    DISORDER_SECOND = 2     # J'' of the superadditivity interpolation
    CAVITY = 3              # one-body fields J'_i of the RS interpolation
    DIRECTIONS = 4
    RESTARTS = 5
    CHECK_POINTS = 6        # random parameter points of the acceptance suite


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed."""
    seed = int(seed)
    if seed < 0 or seed > UINT64_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def generator(seed: int, *path: int) -> np.random.Generator:
    """
    Return the Philox generator for a stream path.

    Args:
        seed: Master 64-bit seed
        path: Stream coordinates, e.g. ``(Purpose.DISORDER, sample_index)``

    Returns:
        A fresh ``numpy.random.Generator`` positioned at the start of the stream
    """
    seed_seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seed_seq))

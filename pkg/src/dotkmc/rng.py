"""Seeding helpers built on a counter-based bit generator.

Every trajectory and every sweep grid point owns an independent Philox
stream. Philox is keyed, not jumped: combining a base seed with a point index
into a single 128-bit key gives streams that are independent by construction
and reproducible regardless of scheduling or worker count.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "point_seed"]

_U64 = 1 << 64


def point_seed(seed_base: int, index: int) -> int:
    """Injective 128-bit key for grid point ``index`` under ``seed_base``."""
    if not 0 <= seed_base < _U64:
        raise ValueError("seed_base must fit in 64 bits")
    if not 0 <= index < _U64:
        raise ValueError("index must fit in 64 bits")
    return (seed_base << 64) | index


def make_rng(seed) -> np.random.Generator:
    """Generator from an integer key; passes Generator instances through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not 0 <= seed < (1 << 128):
        raise ValueError("seed must be a non-negative 128-bit integer")
    return np.random.Generator(np.random.Philox(key=seed))

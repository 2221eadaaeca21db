"""Seedable, splittable random streams (PCG64 behind numpy Generators).

Identical seeds reproduce identical draws bit-for-bit on one platform, and
replica streams derived from (seed, replica index) are independent, so
aggregated results do not depend on dispatch order.
"""

from __future__ import annotations

import numpy as np


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def replica_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,)))
    )

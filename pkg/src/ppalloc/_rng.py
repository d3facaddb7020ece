"""Seed discipline shared by every Monte Carlo driver.

Each trial draws from its own generator, addressed by ``(master, trial, stream)``,
so chunking and thread count never change which numbers a trial sees.
"""

from __future__ import annotations

import numpy as np

ARRIVALS = 0
POLICY = 1
INSTANCE = 2


def trial_rng(master: int, trial: int, stream: int = ARRIVALS) -> np.random.Generator:
    if master < 0 or trial < 0:
        raise ValueError("seeds and trial indices must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=(trial, stream)))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)

"""Seed derivation: one independent counter-based stream per (master seed, keys...)."""
from __future__ import annotations

import os

import numpy as np

SEED_ENV = "LOGICAL_BELL_SEED"


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def master_seed(explicit: int | None = None, default: int = 2024) -> int:
    """Explicit seed wins, then the environment override, then ``default``."""
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(SEED_ENV)
    return int(env) if env else default

"""Deterministic 64-bit seed derivation for descent RNG streams.

Every stochastic component draws from a counter-based generator keyed by a
seed mixed from the base seed and the component's structural indices
(descent number, tree level, slot, restart count). Runs are therefore
reproducible from the manifest alone; wall-clock seeding is an explicit
opt-in fallback.
"""

from __future__ import annotations

import time

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One output step of the splitmix64 generator (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def mix64(base: int, *indices: int) -> int:
    """Fold structural indices into a base seed, one splitmix64 step each."""
    acc = splitmix64(base & _MASK)
    for idx in indices:
        acc = splitmix64((acc ^ (idx & _MASK)) & _MASK)
    return acc


def clock_seed() -> int:
    """Wall-clock fallback seed (non-reproducible by design)."""
    return splitmix64(time.time_ns() & _MASK)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; streams with distinct keys are independent."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK))

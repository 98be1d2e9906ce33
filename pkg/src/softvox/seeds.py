"""Deterministic seed derivation.

Every random stream in a run is derived from the master seed with a
splitmix64-style mixer, never from shared RNG state.  This makes results
independent of evaluation order: worker threads may finish in any order
and the outcome is still bit-identical.

Mixer constants (Steele & Vigna's splitmix64):
    increment   0x9E3779B97F4A7C15
    multiplier1 0xBF58476D1CE4E5B9
    multiplier2 0x94D049BB133111EB
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_INC = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

# Stream tags keep unrelated uses of the same (seed, generation, slot)
# coordinates from colliding.
TAG_INIT = 101
TAG_MUTATE = 202
TAG_EVAL = 303
TAG_REP = 404
TAG_REEVAL = 505


def _splitmix64(x: int) -> int:
    x = (x + _INC) & _MASK
    x = ((x ^ (x >> 30)) * _MUL1) & _MASK
    x = ((x ^ (x >> 27)) * _MUL2) & _MASK
    return x ^ (x >> 31)


def mix(*parts: int) -> int:
    """Fold integers into one 64-bit seed, order-sensitively."""
    state = 0
    for part in parts:
        state = _splitmix64((state ^ (part & _MASK)) & _MASK)
    return state


def rng_for(*parts: int) -> np.random.Generator:
    """A fresh PCG64 generator keyed by the given coordinates."""
    return np.random.Generator(np.random.PCG64(mix(*parts)))

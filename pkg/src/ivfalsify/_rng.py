"""Deterministic random streams.

All randomness in the package flows through counter-based Philox generators
keyed by ``(seed, *path)``.  Two calls with the same key produce the same
stream on every platform, and sub-streams derived from distinct paths are
independent, so parallel evaluation order can never change results.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator keyed by ``(seed, *path)``."""
    key = tuple(int(p) & _MASK64 for p in (seed, *path))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))

"""Counter-based random number streams.

Every stochastic routine in the package draws from a Philox generator keyed
by (seed, stream index), so replicate i of a run with seed s always sees the
same numbers regardless of execution order or parallelism.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for replicate `index` of the run seeded `seed`."""
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))

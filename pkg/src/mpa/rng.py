"""Deterministic seeded random streams.

Every stochastic stage draws from an independent numpy Generator whose seed
is derived from the run seed and a structural path (stream tag, episode
index, class id, ...) by chained splitmix64 mixing.  Streams are therefore
a pure function of (seed, path): parallel and serial execution, and any
evaluation order, produce identical draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream tags; one per stochastic stage so stages never share a stream.
STREAM_EPISODE = 1   # class/item sampling within an episode
STREAM_AUCA = 2      # uncertain-class generation
STREAM_AUGMENT = 3   # color jitter during extraction, split per image
STREAM_SYNTH = 4     # synthetic bank generation


def splitmix64(x: int) -> int:
    """The splitmix64 finalizer: a 64-bit avalanche permutation."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, *path: int) -> int:
    """Mix a base seed and a structural path into one 64-bit stream seed."""
    z = splitmix64(seed & _MASK64)
    for part in path:
        z = splitmix64((z ^ ((int(part) + 1) * _GOLDEN)) & _MASK64)
    return z


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent Generator for the given (seed, path)."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *path)))

"""Portable counter-based SplitMix64 uniform generator.

Meshes must be bit-reproducible across platforms and numpy versions, so the
step draws do not go through ``numpy.random``.  SplitMix64 is a pure function
of ``(seed, index)``, which also makes it trivially vectorisable.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Return outputs ``offset .. offset+count-1`` of the stream for ``seed``."""
    state = np.uint64(int(seed) & _MASK64)
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(state + idx * _GOLDEN)


def uniform_open(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Uniform doubles in the open interval (0, 1).

    Uses the top 53 bits and shifts by half an ulp so that 0 is never drawn
    (a zero step would make the mesh degenerate).
    """
    bits = splitmix64(seed, count, offset) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def substream_seed(seed: int, *keys: int) -> int:
    """Derive an independent seed from ``seed`` and integer keys."""
    s = int(seed) & _MASK64
    for key in keys:
        s = int(splitmix64(s ^ (int(key) & _MASK64), 1)[0])
    return s

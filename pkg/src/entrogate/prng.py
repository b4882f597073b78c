"""SplitMix64, the seedable generator behind every synthetic fixture.

SplitMix64 (Steele, Lea & Flood 2014) is counter based: output ``i`` of a
stream seeded with ``s`` is ``mix(s + (i + 1) * GOLDEN)`` modulo 2**64, so it
vectorizes in numpy and is trivially reproduced in any language with
wrapping 64-bit integers.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def mix64(value: int) -> int:
    """Scalar finalizer, used to hash small keys such as ``(seed, frame_id)``."""
    with np.errstate(over="ignore"):
        return int(_mix(np.array([value & _MASK], dtype=np.uint64))[0])


class SplitMix64:
    """Stateful SplitMix64 stream.

    >>> rng = SplitMix64(1234567)
    >>> hex(rng.next_u64())
    '0x599ed017fb08fc85'
    """

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK

    def next_u64(self) -> int:
        return int(self.u64(1)[0])

    def u64(self, n: int) -> np.ndarray:
        """Return the next ``n`` outputs as a ``uint64`` array."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * np.uint64(GOLDEN)
            out = _mix(z)
        self._state = (self._state + n * GOLDEN) & _MASK
        return out

    def bytes(self, n: int) -> np.ndarray:
        """``n`` uniform bytes, little-endian unpacking of successive outputs."""
        words = self.u64((n + 7) // 8)
        return words.astype("<u8").view(np.uint8)[:n].copy()

    def below(self, bound: int, n: int) -> np.ndarray:
        """``n`` integers in ``[0, bound)`` via the high 32 bits (multiply-shift)."""
        hi = self.u64(n) >> np.uint64(32)
        return ((hi * np.uint64(bound)) >> np.uint64(32)).astype(np.int64)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in ``[0, 1)`` from the top 53 bits."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

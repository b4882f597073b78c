"""Time sources. All timestamps are integer nanoseconds."""

from __future__ import annotations

import time

DEFAULT_TICK_NS = 33_000_000


class VirtualClock:
    """Deterministic clock: frame ``i`` is captured at ``i * tick_ns``."""

    virtual = True

    def __init__(self, tick_ns: int = DEFAULT_TICK_NS) -> None:
        if tick_ns <= 0:
            raise ValueError(f"virtual tick must be > 0 ns, got {tick_ns}")
        self.tick_ns = tick_ns

    def stamp(self, index: int) -> int:
        return index * self.tick_ns


class MonotonicClock:
    """Wall clock relative to construction, from ``time.monotonic_ns``."""

    virtual = False

    def __init__(self) -> None:
        self._origin = time.monotonic_ns()

    def now(self) -> int:
        return time.monotonic_ns() - self._origin

    def stamp(self, index: int) -> int:
        return self.now()

"""Bounded, lock-guarded staging buffers between scoring and inference.

:class:`FrameBuffer` orders by priority: a full buffer evicts its lowest
priority resident to admit a strictly better arrival and rejects anything
else, so the best frame present is never displaced. :class:`FifoFrameBuffer`
is the entropy-free fallback used when gating is switched off.

Neither buffer blocks. ``push`` always returns an outcome and ``pop_highest``
returns ``None`` when empty. Each operation is atomic under one mutex.
"""

from __future__ import annotations

import enum
import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Optional

from entrogate.entropy import PriorityScore
from entrogate.errors import ConfigError


@dataclass(frozen=True)
class ScoredFrame:
    frame_id: int
    capture_time: int
    frame: Any
    score: PriorityScore

    @property
    def priority(self) -> float:
        return self.score.p


class PushStatus(enum.Enum):
    ACCEPTED = "accepted"
    ACCEPTED_EVICTING = "accepted_evicting"
    REJECTED = "rejected"


@dataclass(frozen=True)
class PushOutcome:
    status: PushStatus
    evicted: Optional[ScoredFrame] = None

    @property
    def evicted_id(self) -> Optional[int]:
        return None if self.evicted is None else self.evicted.frame_id


ACCEPTED = PushOutcome(PushStatus.ACCEPTED)
REJECTED = PushOutcome(PushStatus.REJECTED)


class _BoundedBuffer:
    def __init__(self, capacity: int) -> None:
        if not isinstance(capacity, int) or capacity < 1:
            raise ConfigError(f"buffer capacity must be an integer >= 1, got {capacity!r}")
        self.capacity = capacity
        self._lock = threading.Lock()

    def push(self, item: ScoredFrame) -> PushOutcome:
        with self._lock:
            return self._push_locked(item)

    def pop_highest(self) -> Optional[ScoredFrame]:
        with self._lock:
            return self._pop_locked()

    def __len__(self) -> int:
        with self._lock:
            return self._size()

    def snapshot(self) -> list[ScoredFrame]:
        """Residents at one instant, in no particular order."""
        with self._lock:
            return self._entries_locked()

    def _push_locked(self, item: ScoredFrame) -> PushOutcome:
        raise NotImplementedError

    def _pop_locked(self) -> Optional[ScoredFrame]:
        raise NotImplementedError

    def _size(self) -> int:
        raise NotImplementedError

    def _entries_locked(self) -> list[ScoredFrame]:
        raise NotImplementedError


def _evict_key(sf: ScoredFrame) -> tuple[float, int]:
    # lowest priority first, oldest among ties
    return (sf.score.p, sf.frame_id)


def _serve_key(sf: ScoredFrame) -> tuple[float, int]:
    # highest priority first, oldest among ties
    return (-sf.score.p, sf.frame_id)


class FrameBuffer(_BoundedBuffer):
    """Priority buffer. Pops the highest priority entry, oldest first on ties.

    Residents are kept in a plain list and scanned linearly; capacities are
    in the tens, where this beats maintaining two heaps.
    """

    def __init__(self, capacity: int = 16) -> None:
        super().__init__(capacity)
        self._entries: list[ScoredFrame] = []

    def _push_locked(self, item: ScoredFrame) -> PushOutcome:
        if len(self._entries) < self.capacity:
            self._entries.append(item)
            return ACCEPTED
        victim_idx = min(range(len(self._entries)), key=lambda i: _evict_key(self._entries[i]))
        victim = self._entries[victim_idx]
        if item.score.p <= victim.score.p:
            return REJECTED
        self._entries[victim_idx] = item
        return PushOutcome(PushStatus.ACCEPTED_EVICTING, victim)

    def _pop_locked(self) -> Optional[ScoredFrame]:
        if not self._entries:
            return None
        idx = min(range(len(self._entries)), key=lambda i: _serve_key(self._entries[i]))
        last = self._entries.pop()
        if idx == len(self._entries):
            return last
        best, self._entries[idx] = self._entries[idx], last
        return best

    def _size(self) -> int:
        return len(self._entries)

    def _entries_locked(self) -> list[ScoredFrame]:
        return list(self._entries)


class FifoFrameBuffer(_BoundedBuffer):
    """Bounded FIFO that drops its oldest entry on overflow. Ignores priority."""

    def __init__(self, capacity: int = 16) -> None:
        super().__init__(capacity)
        self._entries: deque[ScoredFrame] = deque()

    def _push_locked(self, item: ScoredFrame) -> PushOutcome:
        victim = None
        if len(self._entries) == self.capacity:
            victim = self._entries.popleft()
        self._entries.append(item)
        return ACCEPTED if victim is None else PushOutcome(PushStatus.ACCEPTED_EVICTING, victim)

    def _pop_locked(self) -> Optional[ScoredFrame]:
        return self._entries.popleft() if self._entries else None

    def _size(self) -> int:
        return len(self._entries)

    def _entries_locked(self) -> list[ScoredFrame]:
        return list(self._entries)


def new_buffer(capacity: int, *, prioritized: bool = True) -> _BoundedBuffer:
    return FrameBuffer(capacity) if prioritized else FifoFrameBuffer(capacity)

"""Frame entropy, temporal entropy change, priority scoring and gating.

Everything here is a pure function over immutable inputs. Entropy is measured
in bits over a 256-bin grayscale histogram, so scores live in ``[0, 8]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from entrogate.errors import ConfigError, DomainError

N_BINS = 256
MAX_ENTROPY_BITS = 8.0

PixelInput = Union[np.ndarray, Sequence[int], bytes]


class Decision(enum.Enum):
    KEEP = "keep"
    DROP = "drop"


@dataclass(frozen=True)
class GateConfig:
    """Scoring weights and the rejection cutoff.

    ``alpha`` weighs spatial entropy, ``beta`` weighs the entropy change from
    the previous frame; frames scoring below ``threshold`` are dropped.
    """

    alpha: float = 0.6
    beta: float = 0.4
    threshold: float = 3.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "threshold"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite value >= 0, got {value!r}")
        if self.alpha + self.beta <= 0:
            raise ConfigError("alpha + beta must be > 0")


@dataclass(frozen=True)
class PriorityScore:
    p: float
    h: float
    delta_h: float


def compute_histogram(pixels: PixelInput) -> np.ndarray:
    """Normalized 256-bin intensity histogram of an 8-bit grayscale frame.

    Bin ``i`` is the fraction of pixels with intensity ``i``.
    """
    if isinstance(pixels, (bytes, bytearray, memoryview)):
        arr = np.frombuffer(pixels, dtype=np.uint8)
    else:
        arr = np.asarray(pixels)
    arr = arr.ravel()
    if arr.size == 0:
        raise DomainError("empty frame")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise DomainError(f"pixel values must be integers, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise DomainError("pixel values must lie in [0, 255]")
    counts = np.bincount(arr.astype(np.intp, copy=False), minlength=N_BINS)
    return counts / arr.size


def shannon_entropy(hist: np.ndarray) -> float:
    """``-sum(p * log2(p))`` over the non-empty bins of ``hist``.

    Empty bins contribute nothing (0 log 0 is taken as 0). The result is
    clamped to ``[0, 8]`` to absorb rounding at the extremes.
    """
    p = np.asarray(hist, dtype=np.float64)
    if p.shape != (N_BINS,):
        raise DomainError(f"histogram must have {N_BINS} bins, got shape {p.shape}")
    nz = p[p > 0]
    h = float(-np.sum(nz * np.log2(nz)))
    return min(max(h, 0.0), MAX_ENTROPY_BITS)


def frame_entropy(pixels: PixelInput) -> float:
    return shannon_entropy(compute_histogram(pixels))


def entropy_delta(h_current: float, h_previous: float) -> float:
    """Absolute change in entropy between consecutive frames."""
    return abs(h_current - h_previous)


def priority_score(h: float, delta_h: float, cfg: GateConfig) -> PriorityScore:
    if delta_h < 0:
        raise DomainError(f"delta_h must be >= 0, got {delta_h!r}")
    return PriorityScore(p=cfg.alpha * h + cfg.beta * delta_h, h=h, delta_h=delta_h)


def gate(score: PriorityScore, cfg: GateConfig) -> Decision:
    # scores equal to the threshold are kept
    return Decision.DROP if score.p < cfg.threshold else Decision.KEEP


class StreamScorer:
    """Scores frames in stream order, remembering the previous entropy.

    The first frame has no predecessor and gets ``delta_h = 0``.
    """

    def __init__(self, cfg: GateConfig) -> None:
        self.cfg = cfg
        self._previous: float | None = None

    def score(self, pixels: PixelInput) -> PriorityScore:
        h = frame_entropy(pixels)
        delta = 0.0 if self._previous is None else entropy_delta(h, self._previous)
        self._previous = h
        return priority_score(h, delta, self.cfg)

"""The inference stage: a single-frame detector interface and a stub backend.

The stub stands in for a real object detector. Its latency is configurable
and deterministic per ``(seed, frame_id)``, so pipeline timing can be
reproduced exactly under the virtual clock. A real backend only needs an
``infer(frame)`` method with the same return type.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol

from entrogate.errors import ConfigError, EntrogateError
from entrogate.prng import mix64
from entrogate.video_io import Frame

CLASS_NAMES = ("person", "vehicle", "fire", "weapon", "intruder")


class InferenceError(EntrogateError):
    def __init__(self, frame_id: int, message: str) -> None:
        super().__init__(f"inference failed on frame {frame_id}: {message}")
        self.frame_id = frame_id


@dataclass(frozen=True)
class Detection:
    class_id: int
    confidence: float
    bbox: tuple[int, int, int, int]  # x, y, w, h in pixels

    def __post_init__(self) -> None:
        if not 0 <= self.class_id < len(CLASS_NAMES):
            raise ValueError(f"class_id must be in [0, {len(CLASS_NAMES) - 1}]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")

    def inside(self, width: int, height: int) -> bool:
        x, y, w, h = self.bbox
        return x >= 0 and y >= 0 and w >= 0 and h >= 0 and x + w <= width and y + h <= height


@dataclass(frozen=True)
class InferenceResult:
    detections: list[Detection]
    duration_ns: int


class Detector(Protocol):
    """One frame in, detections out. There is deliberately no batched call."""

    def infer(self, frame: Frame) -> InferenceResult: ...


@dataclass(frozen=True)
class StubDetectorConfig:
    base_latency_ns: int = 30_000_000
    jitter_ns: int = 0
    seed: int = 0
    synthetic_truth: bool = False

    def __post_init__(self) -> None:
        if self.base_latency_ns < 0:
            raise ConfigError(f"base_latency must be >= 0, got {self.base_latency_ns} ns")
        if self.jitter_ns < 0:
            raise ConfigError(f"jitter must be >= 0, got {self.jitter_ns} ns")
        if self.jitter_ns > self.base_latency_ns:
            raise ConfigError("jitter must not exceed base_latency")


class StubDetector:
    """Deterministic stand-in detector.

    With ``virtual=True`` the call returns immediately and reports the
    configured latency as its duration; otherwise it sleeps for that latency
    and reports the measured wall time. In synthetic-truth mode it echoes the
    generator's ground-truth box as a single ``person`` detection.
    """

    def __init__(self, config: StubDetectorConfig | None = None, *, virtual: bool = True) -> None:
        self.config = config or StubDetectorConfig()
        self.virtual = virtual

    def latency_ns(self, frame_id: int) -> int:
        cfg = self.config
        if cfg.jitter_ns == 0:
            return cfg.base_latency_ns
        u = (mix64(cfg.seed ^ mix64(frame_id)) >> 11) * 2.0**-53
        return cfg.base_latency_ns + round((2.0 * u - 1.0) * cfg.jitter_ns)

    def infer(self, frame: Frame) -> InferenceResult:
        planned = self.latency_ns(frame.frame_id)
        if self.virtual:
            duration = planned
        else:
            start = time.perf_counter_ns()
            time.sleep(planned / 1e9)
            duration = time.perf_counter_ns() - start
        detections = []
        if self.config.synthetic_truth and frame.truth is not None:
            detections.append(Detection(class_id=0, confidence=1.0, bbox=frame.truth))
        return InferenceResult(detections, duration)

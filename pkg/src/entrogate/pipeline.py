"""Ingest -> score -> gate -> buffer -> infer, on two threads.

The ingestion thread pulls frames from the source, scores them, applies the
gate and pushes survivors into the buffer. The inference thread pops the best
buffered frame and runs the detector on it, one frame at a time. Both threads
report per-frame events on a records channel; the ledger is assembled after
they have joined.

Under the virtual clock the two threads advance in lock-step so that a run is
a pure function of its configuration. Pushes stamped at time ``t`` are
ordered before a pop at time ``t``; the ingestion thread may not run ahead of
the inference thread's virtual time and vice versa. Scoring costs no virtual
time, so a frame enters the buffer at its capture time.

With gating disabled the buffer becomes a bounded FIFO that drops its oldest
entry on overflow, so no entropy information influences which frames are
served.
"""

from __future__ import annotations

import logging
import math
import queue
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional

from entrogate.buffer import PushStatus, ScoredFrame, new_buffer
from entrogate.clock import DEFAULT_TICK_NS, MonotonicClock, VirtualClock
from entrogate.detector import Detector, StubDetector, StubDetectorConfig
from entrogate.entropy import Decision, GateConfig, StreamScorer, gate
from entrogate.errors import ConfigError, EntrogateError
from entrogate.ledger import FrameRecord, Outcome
from entrogate.stats import PairedTestResult, paired_t_test, summarize
from entrogate.video_io import (
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    Frame,
    SceneSpec,
    generate_scene,
    read_raw_sequence,
    read_y4m,
)

log = logging.getLogger(__name__)

LATENCY_SD_REFERENCE_MS = 1.2
_INF = math.inf


@dataclass(frozen=True)
class ClockMode:
    """``virtual=True``: deterministic ticks of ``tick_ns``.

    ``virtual=False``: real monotonic time; ``tick_ns`` then paces ingestion
    (0 reads the source as fast as possible).
    """

    virtual: bool = True
    tick_ns: int = DEFAULT_TICK_NS

    def __post_init__(self) -> None:
        if self.virtual and self.tick_ns <= 0:
            raise ConfigError(f"virtual tick must be > 0, got {self.tick_ns} ns")
        if self.tick_ns < 0:
            raise ConfigError(f"frame interval must be >= 0, got {self.tick_ns} ns")


@dataclass(frozen=True)
class SourceSpec:
    """Either a synthetic scene or an input file (``.y4m`` or raw)."""

    scene: SceneSpec = field(default_factory=SceneSpec)
    input_path: Optional[str] = None
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def open(self, clock) -> Iterator[Frame]:
        if self.input_path is None:
            return generate_scene(self.scene, self.width, self.height, clock=clock)
        if Path(self.input_path).suffix.lower() == ".y4m":
            return read_y4m(self.input_path, clock=clock)
        return read_raw_sequence(self.input_path, self.width, self.height, clock=clock)


@dataclass(frozen=True)
class PipelineConfig:
    gate: GateConfig = field(default_factory=GateConfig)
    buffer_capacity: int = 16
    gating_enabled: bool = True
    clock: ClockMode = field(default_factory=ClockMode)
    source: SourceSpec = field(default_factory=SourceSpec)
    detector: StubDetectorConfig = field(default_factory=StubDetectorConfig)

    def __post_init__(self) -> None:
        if not isinstance(self.buffer_capacity, int) or self.buffer_capacity < 1:
            raise ConfigError(f"buffer_capacity must be an integer >= 1, got {self.buffer_capacity!r}")


def _summary(values: list[float]) -> Optional[dict]:
    return summarize(values).to_dict() if values else None


@dataclass
class RunMetrics:
    gating_enabled: bool
    clock_virtual: bool
    tick_ns: int
    frames_ingested: int = 0
    frames_inferred: int = 0
    frames_dropped_at_gate: int = 0
    frames_evicted: int = 0
    frames_rejected: int = 0
    frames_failed: int = 0
    frames_in_flight: int = 0
    wall_duration_ns: int = 0
    inference_busy_ns: int = 0
    end_to_end_latency_ms: list[float] = field(default_factory=list)
    staleness_ms: list[float] = field(default_factory=list)
    inference_ms: list[float] = field(default_factory=list)
    buffer_residence_ms: list[float] = field(default_factory=list)
    scoring_ms: list[float] = field(default_factory=list)

    @property
    def throughput_fps(self) -> float:
        """Inferred frames per second of wall time."""
        if self.wall_duration_ns <= 0:
            return 0.0
        return self.frames_inferred / (self.wall_duration_ns / 1e9)

    @property
    def processing_fps(self) -> Optional[float]:
        """Ingested frames per second of detector time.

        The input rate the pipeline can sustain at the observed selection
        ratio; this is what frame selection improves.
        """
        if self.inference_busy_ns <= 0:
            return None
        return self.frames_ingested / (self.inference_busy_ns / 1e9)

    def conservation_holds(self) -> bool:
        return self.frames_ingested == (
            self.frames_inferred
            + self.frames_dropped_at_gate
            + self.frames_evicted
            + self.frames_rejected
            + self.frames_failed
            + self.frames_in_flight
        )

    def to_dict(self) -> dict:
        e2e = _summary(self.end_to_end_latency_ms)
        sd = e2e["sd"] if e2e else None
        return {
            "schema": "entrogate.metrics/1",
            "gating_enabled": self.gating_enabled,
            "clock": {"mode": "virtual" if self.clock_virtual else "monotonic", "tick_ns": self.tick_ns},
            "frames_ingested": self.frames_ingested,
            "frames_inferred": self.frames_inferred,
            "frames_dropped_at_gate": self.frames_dropped_at_gate,
            "frames_evicted": self.frames_evicted,
            "frames_rejected": self.frames_rejected,
            "frames_failed": self.frames_failed,
            "frames_in_flight": self.frames_in_flight,
            "wall_duration_ns": self.wall_duration_ns,
            "inference_busy_ns": self.inference_busy_ns,
            "throughput_fps": self.throughput_fps,
            "processing_fps": self.processing_fps,
            "end_to_end_latency_ms": e2e,
            "staleness_ms": _summary(self.staleness_ms),
            "stages": {
                "scoring_ms": _summary(self.scoring_ms),
                "buffer_residence_ms": _summary(self.buffer_residence_ms),
                "inference_ms": _summary(self.inference_ms),
            },
            "latency_sd_reference_ms": LATENCY_SD_REFERENCE_MS,
            "latency_sd_within_reference": None if sd is None else sd < LATENCY_SD_REFERENCE_MS,
        }


@dataclass
class RunResult:
    metrics: RunMetrics
    ledger: list[FrameRecord]


# -- schedulers -------------------------------------------------------------


class _VirtualScheduler:
    """Lock-step coordination of the two threads on virtual time."""

    def __init__(self, buffer) -> None:
        self._buffer = buffer
        self._cond = threading.Condition()
        self._ingest_time = -_INF  # capture time of the last fully ingested frame
        self._horizon = -_INF  # capture time of the frame waiting to be ingested
        self._ingest_done = False
        self._consumer_time = 0.0  # next pop time; +inf while idle on an empty buffer

    def before_ingest(self, capture_time: int) -> int:
        with self._cond:
            self._horizon = capture_time
            self._cond.notify_all()
            while self._consumer_time < capture_time:
                self._cond.wait()
        return capture_time

    def after_ingest(self, capture_time: int, pushed: bool) -> None:
        with self._cond:
            self._ingest_time = capture_time
            if pushed and self._consumer_time == _INF:
                self._consumer_time = capture_time
            self._cond.notify_all()

    def close_ingest(self) -> None:
        with self._cond:
            self._ingest_done = True
            self._cond.notify_all()

    def next_item(self) -> Optional[tuple[ScoredFrame, int]]:
        with self._cond:
            while True:
                while not self._pushes_settled():
                    self._cond.wait()
                item = self._buffer.pop_highest()
                if item is not None:
                    return item, int(self._consumer_time)
                if self._ingest_done:
                    return None
                self._consumer_time = _INF
                self._cond.notify_all()
                while self._consumer_time == _INF and not self._ingest_done:
                    self._cond.wait()

    def _pushes_settled(self) -> bool:
        # every push stamped at or before the pending pop time has happened
        t = self._consumer_time
        return self._ingest_done or self._ingest_time >= t or self._horizon > t

    def finished_item(self, end_time: int) -> None:
        with self._cond:
            self._consumer_time = end_time
            self._cond.notify_all()

    def abort(self) -> None:
        # lets ingestion run to completion; leftovers are reported in flight
        with self._cond:
            self._consumer_time = _INF
            self._cond.notify_all()

    def now(self, fallback: int) -> int:
        return fallback


class _RealtimeScheduler:
    def __init__(self, buffer, clock: MonotonicClock) -> None:
        self._buffer = buffer
        self._clock = clock
        self._cond = threading.Condition()
        self._pushes = 0
        self._ingest_done = False

    def before_ingest(self, capture_time: int) -> int:
        return self._clock.now()

    def after_ingest(self, capture_time: int, pushed: bool) -> None:
        if pushed:
            with self._cond:
                self._pushes += 1
                self._cond.notify_all()

    def close_ingest(self) -> None:
        with self._cond:
            self._ingest_done = True
            self._cond.notify_all()

    def next_item(self) -> Optional[tuple[ScoredFrame, int]]:
        while True:
            with self._cond:
                seen = self._pushes
            item = self._buffer.pop_highest()
            if item is not None:
                return item, self._clock.now()
            with self._cond:
                while self._pushes == seen and not self._ingest_done:
                    self._cond.wait()
                if self._pushes == seen and self._ingest_done:
                    return None

    def finished_item(self, end_time: int) -> None:
        pass

    def abort(self) -> None:
        pass

    def now(self, fallback: int) -> int:
        return self._clock.now()


# -- run --------------------------------------------------------------------


def _paced(source: Iterable[Frame], clock: MonotonicClock, interval_ns: int) -> Iterator[Frame]:
    it = iter(source)
    index = 0
    while True:
        if interval_ns:
            delay = index * interval_ns - clock.now()
            if delay > 0:
                time.sleep(delay / 1e9)
        try:
            frame = next(it)
        except StopIteration:
            return
        yield frame
        index += 1


def run(cfg: PipelineConfig, *, source: Optional[Iterable[Frame]] = None,
        detector: Optional[Detector] = None) -> RunResult:
    """Run one stream through the pipeline and return metrics plus the ledger.

    ``source`` and ``detector`` override the ones described by ``cfg``.
    Frames from an explicit source keep their own capture times.
    """
    virtual = cfg.clock.virtual
    clock = VirtualClock(cfg.clock.tick_ns) if virtual else MonotonicClock()
    if source is None:
        source = cfg.source.open(clock)
    if detector is None:
        detector = StubDetector(cfg.detector, virtual=virtual)
    if not virtual:
        source = _paced(source, clock, cfg.clock.tick_ns)

    buffer = new_buffer(cfg.buffer_capacity, prioritized=cfg.gating_enabled)
    sched = _VirtualScheduler(buffer) if virtual else _RealtimeScheduler(buffer, clock)
    records: queue.SimpleQueue = queue.SimpleQueue()
    errors: list[BaseException] = []

    def ingest() -> None:
        scorer = StreamScorer(cfg.gate)
        last_id = None
        try:
            for frame in source:
                last_id = frame.frame_id
                capture = frame.capture_time
                sched.before_ingest(capture)
                t0 = time.perf_counter_ns()
                score = scorer.score(frame.pixels)
                scoring_ns = time.perf_counter_ns() - t0
                records.put(("scored", frame.frame_id, capture, score, 0 if virtual else scoring_ns))
                pushed = False
                if cfg.gating_enabled and gate(score, cfg.gate) is Decision.DROP:
                    records.put(("final", frame.frame_id, Outcome.DROPPED))
                else:
                    enter = sched.now(capture)
                    outcome = buffer.push(ScoredFrame(frame.frame_id, capture, frame, score))
                    if outcome.status is PushStatus.REJECTED:
                        records.put(("final", frame.frame_id, Outcome.REJECTED))
                    else:
                        pushed = True
                        records.put(("enter", frame.frame_id, enter))
                        if outcome.evicted is not None:
                            records.put(("final", outcome.evicted.frame_id, Outcome.EVICTED))
                sched.after_ingest(capture, pushed)
        except BaseException as exc:  # noqa: BLE001 - re-raised on the caller's thread
            where = "before the first frame" if last_id is None else f"after frame {last_id}"
            log.debug("ingestion stopped %s: %s", where, exc)
            errors.append(exc)
        finally:
            sched.close_ingest()

    def infer() -> None:
        try:
            serve()
        except BaseException as exc:  # noqa: BLE001 - re-raised on the caller's thread
            errors.append(exc)
            sched.abort()

    def serve() -> None:
        while True:
            got = sched.next_item()
            if got is None:
                return
            item, start = got
            try:
                result = detector.infer(item.frame)
            except Exception as exc:
                end = start if virtual else sched.now(start)
                log.warning("%s", exc)
                records.put(("infer", item.frame_id, start, end, Outcome.FAILED))
                sched.finished_item(end)
                continue
            end = start + result.duration_ns if virtual else sched.now(start)
            records.put(("infer", item.frame_id, start, end, Outcome.INFERRED))
            sched.finished_item(end)

    threads = [
        threading.Thread(target=ingest, name="entrogate-ingest", daemon=True),
        threading.Thread(target=infer, name="entrogate-infer", daemon=True),
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall_end = None if virtual else clock.now()
    if errors:
        exc = errors[0]
        if isinstance(exc, (EntrogateError, OSError)):
            raise exc
        raise EntrogateError(f"source failed: {exc}") from exc

    return _collect(records, cfg, wall_end)


def _collect(records: queue.SimpleQueue, cfg: PipelineConfig, wall_end: Optional[int]) -> RunResult:
    rows: dict[int, dict] = {}
    scoring: list[float] = []
    while True:
        try:
            event = records.get_nowait()
        except queue.Empty:
            break
        kind, fid = event[0], event[1]
        if kind == "scored":
            _, _, capture, score, scoring_ns = event
            rows[fid] = {
                "frame_id": fid,
                "capture_time": capture,
                "entropy": score.h,
                "delta_h": score.delta_h,
                "priority": score.p,
                "decision": Outcome.KEPT,
            }
            if not cfg.clock.virtual:
                scoring.append(scoring_ns / 1e6)
        elif kind == "final":
            rows[fid]["decision"] = event[2]
        elif kind == "enter":
            rows[fid]["buffer_enter_time"] = event[2]
        elif kind == "infer":
            _, _, start, end, outcome = event
            rows[fid].update(inference_start_time=start, inference_end_time=end, decision=outcome)

    ledger = [FrameRecord(**rows[k]) for k in sorted(rows)]
    m = RunMetrics(
        gating_enabled=cfg.gating_enabled,
        clock_virtual=cfg.clock.virtual,
        tick_ns=cfg.clock.tick_ns,
        frames_ingested=len(ledger),
        scoring_ms=scoring,
    )
    counters = {
        Outcome.INFERRED: "frames_inferred",
        Outcome.DROPPED: "frames_dropped_at_gate",
        Outcome.EVICTED: "frames_evicted",
        Outcome.REJECTED: "frames_rejected",
        Outcome.FAILED: "frames_failed",
        Outcome.KEPT: "frames_in_flight",
    }
    last_end = 0
    for rec in ledger:
        attr = counters[rec.decision]
        setattr(m, attr, getattr(m, attr) + 1)
        if rec.inference_end_time is not None:
            m.inference_busy_ns += rec.inference_end_time - rec.inference_start_time
            last_end = max(last_end, rec.inference_end_time)
            m.inference_ms.append((rec.inference_end_time - rec.inference_start_time) / 1e6)
            m.buffer_residence_ms.append((rec.inference_start_time - rec.buffer_enter_time) / 1e6)
        if rec.decision is Outcome.INFERRED:
            m.end_to_end_latency_ms.append(rec.end_to_end_ns / 1e6)
            m.staleness_ms.append(rec.staleness_ns / 1e6)
    if cfg.clock.virtual:
        # the stream spans one tick per ingested frame; inference may overrun it
        m.wall_duration_ns = max(len(ledger) * cfg.clock.tick_ns, last_end) if ledger else 0
    else:
        m.wall_duration_ns = wall_end or 0
    return RunResult(m, ledger)


# -- ablation ---------------------------------------------------------------


@dataclass(frozen=True)
class SegmentSample:
    index: int
    first_frame: int
    frame_count: int
    inferred: int
    mean_latency_ms: Optional[float]
    processing_fps: Optional[float]


def segment_ledger(ledger: list[FrameRecord], segments: int) -> list[SegmentSample]:
    """Split a ledger into ``segments`` contiguous, near-equal runs of frames.

    Frame ``i`` of ``n`` lands in segment ``i * segments // n``. Fewer frames
    than segments gives one segment per frame.
    """
    if segments < 1:
        raise ConfigError(f"segment count must be >= 1, got {segments}")
    n = len(ledger)
    k = min(segments, n)
    groups: list[list[FrameRecord]] = [[] for _ in range(k)]
    for i, rec in enumerate(ledger):
        groups[i * k // n].append(rec)
    out = []
    for idx, group in enumerate(groups):
        lat = [r.end_to_end_ns / 1e6 for r in group if r.decision is Outcome.INFERRED]
        busy = sum(
            r.inference_end_time - r.inference_start_time
            for r in group
            if r.inference_end_time is not None
        )
        out.append(
            SegmentSample(
                index=idx,
                first_frame=group[0].frame_id,
                frame_count=len(group),
                inferred=len(lat),
                mean_latency_ms=sum(lat) / len(lat) if lat else None,
                processing_fps=len(group) / (busy / 1e9) if busy > 0 else None,
            )
        )
    return out


def paired_samples(a: list[SegmentSample], b: list[SegmentSample], metric: str) -> tuple[list[float], list[float]]:
    """Values of ``metric`` for segments defined on both sides."""
    if len(a) != len(b):
        raise ConfigError(f"segment counts differ ({len(a)} vs {len(b)}); pairing needs equal counts")
    xs, ys = [], []
    for sa, sb in zip(a, b):
        va, vb = getattr(sa, metric), getattr(sb, metric)
        if va is not None and vb is not None:
            xs.append(va)
            ys.append(vb)
    return xs, ys


@dataclass
class AblationResult:
    gated: RunResult
    ungated: RunResult
    segments_gated: list[SegmentSample]
    segments_ungated: list[SegmentSample]
    latency_test: Optional[PairedTestResult]
    throughput_test: Optional[PairedTestResult]

    @property
    def processing_delta_pct(self) -> Optional[float]:
        g, u = self.gated.metrics.processing_fps, self.ungated.metrics.processing_fps
        if g is None or u is None:
            return None
        return (g - u) / u * 100.0

    @property
    def inferred_fps_delta_pct(self) -> Optional[float]:
        g, u = self.gated.metrics.throughput_fps, self.ungated.metrics.throughput_fps
        if u == 0:
            return None
        return (g - u) / u * 100.0

    def to_dict(self) -> dict:
        def test(r: Optional[PairedTestResult]) -> Optional[dict]:
            return None if r is None else r.to_dict()

        return {
            "schema": "entrogate.ablation/1",
            "gated": self.gated.metrics.to_dict(),
            "ungated": self.ungated.metrics.to_dict(),
            "throughput_delta_pct": self.processing_delta_pct,
            "inferred_fps_delta_pct": self.inferred_fps_delta_pct,
            "inference_calls": {
                "gated": self.gated.metrics.frames_inferred,
                "ungated": self.ungated.metrics.frames_inferred,
            },
            "segments": {
                "gated": [asdict(s) for s in self.segments_gated],
                "ungated": [asdict(s) for s in self.segments_ungated],
            },
            "paired_latency_test": test(self.latency_test),
            "paired_throughput_test": test(self.throughput_test),
        }


def _maybe_test(xs: list[float], ys: list[float]) -> Optional[PairedTestResult]:
    return paired_t_test(xs, ys) if len(xs) >= 2 else None


def run_ablation_pair(cfg: PipelineConfig, segments: int = 10) -> AblationResult:
    """Run the same stream with gating on and off and pair the segments.

    Differences in the paired tests are gated minus ungated.
    """
    gated = run(replace(cfg, gating_enabled=True))
    ungated = run(replace(cfg, gating_enabled=False))
    sg = segment_ledger(gated.ledger, segments) if gated.ledger else []
    su = segment_ledger(ungated.ledger, segments) if ungated.ledger else []
    lat = paired_samples(sg, su, "mean_latency_ms")
    thr = paired_samples(sg, su, "processing_fps")
    return AblationResult(gated, ungated, sg, su, _maybe_test(*lat), _maybe_test(*thr))

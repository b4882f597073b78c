"""Entropy-gated frame prioritization for streaming video analytics."""

from entrogate.buffer import FifoFrameBuffer, FrameBuffer, PushOutcome, PushStatus, ScoredFrame
from entrogate.detector import Detection, InferenceError, StubDetector, StubDetectorConfig
from entrogate.entropy import (
    Decision,
    GateConfig,
    PriorityScore,
    compute_histogram,
    entropy_delta,
    gate,
    priority_score,
    shannon_entropy,
)
from entrogate.errors import ConfigError, DomainError, EntrogateError, FormatError
from entrogate.pipeline import (
    ClockMode,
    FrameRecord,
    PipelineConfig,
    RunMetrics,
    RunResult,
    run,
    run_ablation_pair,
)
from entrogate.stats import PairedTestResult, paired_t_test, summarize, throughput
from entrogate.video_io import Frame, SceneKind, SceneSpec, generate_scene, read_raw_sequence, read_y4m

__version__ = "0.1.0"

__all__ = [
    "ClockMode",
    "ConfigError",
    "Decision",
    "Detection",
    "DomainError",
    "EntrogateError",
    "FifoFrameBuffer",
    "FormatError",
    "Frame",
    "FrameBuffer",
    "FrameRecord",
    "GateConfig",
    "InferenceError",
    "PairedTestResult",
    "PipelineConfig",
    "PriorityScore",
    "PushOutcome",
    "PushStatus",
    "RunMetrics",
    "RunResult",
    "SceneKind",
    "SceneSpec",
    "ScoredFrame",
    "StubDetector",
    "StubDetectorConfig",
    "compute_histogram",
    "entropy_delta",
    "gate",
    "generate_scene",
    "paired_t_test",
    "priority_score",
    "read_raw_sequence",
    "read_y4m",
    "run",
    "run_ablation_pair",
    "shannon_entropy",
    "summarize",
    "throughput",
]

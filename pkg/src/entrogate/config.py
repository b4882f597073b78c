"""Run configuration: TOML file, command-line overrides, defaults.

Precedence is flags > file > defaults. An empty file is a valid config.
Unknown tables or keys are rejected so that a misspelt ``alpha`` cannot be
silently ignored. Durations accept ``"33ms"``, ``"1.5s"``, ``"500us"``,
``"100ns"`` or a bare number of milliseconds.

Example (every key shown with its default)::

    seed = 0          # scene texture/repeat positions and detector jitter
    segments = 10     # ablation segments used for paired tests

    [gate]
    alpha = 0.6
    beta = 0.4
    threshold = 3.0
    enabled = true

    [buffer]
    capacity = 16

    [clock]
    mode = "virtual"  # or "monotonic"
    tick = "33ms"     # virtual tick, or pacing interval in monotonic mode

    [source]
    scene = "composite"  # static | moving | noise | composite
    frames = 100
    redundancy = 0.5
    width = 320
    height = 240
    input = ""           # .y4m or raw file; replaces the synthetic scene

    [detector]
    base_latency = "30ms"
    jitter = "0ms"
    synthetic_truth = false

    [output]
    dir = "entrogate-out"
"""

from __future__ import annotations

import copy
import re
import sys
from pathlib import Path
from typing import Any, Optional

from entrogate.detector import StubDetectorConfig
from entrogate.entropy import GateConfig
from entrogate.errors import ConfigError
from entrogate.pipeline import ClockMode, PipelineConfig, SourceSpec
from entrogate.video_io import SceneKind, SceneSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "segments": 10,
    "gate": {"alpha": 0.6, "beta": 0.4, "threshold": 3.0, "enabled": True},
    "buffer": {"capacity": 16},
    "clock": {"mode": "virtual", "tick": "33ms"},
    "source": {
        "scene": "composite",
        "frames": 100,
        "redundancy": 0.5,
        "width": 320,
        "height": 240,
        "input": "",
    },
    "detector": {"base_latency": "30ms", "jitter": "0ms", "synthetic_truth": False},
    "output": {"dir": "entrogate-out"},
}

_DURATION = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ns|us|ms|s)?\s*$")
_UNIT_NS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}


class ConfigParseError(ConfigError):
    """The config file is not valid TOML; carries line and column."""


def parse_duration(value: Any, name: str = "duration") -> int:
    """Duration in integer nanoseconds. Bare numbers are milliseconds."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a duration, got {value!r}")
    if isinstance(value, (int, float)):
        ns = value * 1_000_000
    else:
        m = _DURATION.match(str(value))
        if not m:
            raise ConfigError(f"{name}: cannot parse duration {value!r}")
        ns = float(m.group(1)) * _UNIT_NS[m.group(2) or "ms"]
    if ns < 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    return int(round(ns))


def _merge(base: dict, overlay: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be a table")
            out[key] = _merge(base[key], value, f"{path}.")
        else:
            if isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must not be a table")
            out[key] = value
    return out


def load_file(path: Optional[str | Path]) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from None


def resolve(file_values: dict, overrides: dict) -> dict:
    """Layer ``file_values`` then ``overrides`` over :data:`DEFAULTS`.

    ``overrides`` uses the same nested layout; ``None`` leaves are skipped.
    """
    layered = _merge(DEFAULTS, file_values)

    def prune(d: dict) -> dict:
        return {k: prune(v) if isinstance(v, dict) else v for k, v in d.items() if v is not None}

    return _merge(layered, prune(overrides))


def _typed(value: Any, kind: type, name: str) -> Any:
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"{name} must be {kind.__name__}, got {value!r}")
    return value


def build_pipeline_config(values: dict) -> PipelineConfig:
    g, b, c, s, d = (values[k] for k in ("gate", "buffer", "clock", "source", "detector"))
    seed = _typed(values["seed"], int, "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")

    gate_cfg = GateConfig(
        alpha=_typed(g["alpha"], float, "alpha"),
        beta=_typed(g["beta"], float, "beta"),
        threshold=_typed(g["threshold"], float, "threshold"),
    )
    mode = c["mode"]
    if mode not in ("virtual", "monotonic"):
        raise ConfigError(f"clock.mode must be 'virtual' or 'monotonic', got {mode!r}")
    clock = ClockMode(virtual=mode == "virtual", tick_ns=parse_duration(c["tick"], "clock.tick"))

    try:
        kind = SceneKind(s["scene"])
    except ValueError:
        raise ConfigError(
            f"scene must be one of {[k.value for k in SceneKind]}, got {s['scene']!r}"
        ) from None
    scene = SceneSpec(
        kind=kind,
        frame_count=_typed(s["frames"], int, "frames"),
        seed=seed,
        redundancy_ratio=_typed(s["redundancy"], float, "redundancy"),
    )
    width = _typed(s["width"], int, "width")
    height = _typed(s["height"], int, "height")
    if width < 1 or height < 1:
        raise ConfigError(f"width and height must be >= 1, got {width}x{height}")
    source = SourceSpec(scene=scene, input_path=s["input"] or None, width=width, height=height)

    detector = StubDetectorConfig(
        base_latency_ns=parse_duration(d["base_latency"], "detector.base_latency"),
        jitter_ns=parse_duration(d["jitter"], "detector.jitter"),
        seed=seed,
        synthetic_truth=_typed(d["synthetic_truth"], bool, "synthetic_truth"),
    )
    return PipelineConfig(
        gate=gate_cfg,
        buffer_capacity=_typed(b["capacity"], int, "buffer_capacity"),
        gating_enabled=_typed(g["enabled"], bool, "gate.enabled"),
        clock=clock,
        source=source,
        detector=detector,
    )


def segments_of(values: dict) -> int:
    n = _typed(values["segments"], int, "segments")
    if n < 1:
        raise ConfigError(f"segments must be >= 1, got {n}")
    return n


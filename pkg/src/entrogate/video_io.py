"""Frame sources: raw grayscale sequences, Y4M luma, and synthetic scenes.

Sources are generators of :class:`Frame`. Each frame gets a sequential
``frame_id`` from 0 and a ``capture_time`` from the clock handed to the
source (a :class:`~entrogate.clock.VirtualClock` unless told otherwise).

Synthetic scenes draw all randomness from :class:`~entrogate.prng.SplitMix64`
so fixtures are byte-identical across runs and platforms.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Optional, Union

import numpy as np

from entrogate.clock import VirtualClock
from entrogate.errors import ConfigError, FormatError
from entrogate.prng import SplitMix64

DEFAULT_WIDTH = 320
DEFAULT_HEIGHT = 240

PathLike = Union[str, os.PathLike]
BBox = tuple[int, int, int, int]


@dataclass(frozen=True, eq=False)
class Frame:
    frame_id: int
    capture_time: int
    pixels: np.ndarray  # (height, width) uint8, row-major
    truth: Optional[BBox] = field(default=None)

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2 or self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be a 2-D uint8 array")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


class SceneKind(enum.Enum):
    STATIC = "static"
    MOVING = "moving"
    NOISE = "noise"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class SceneSpec:
    kind: SceneKind = SceneKind.COMPOSITE
    frame_count: int = 100
    seed: int = 0
    redundancy_ratio: float = 0.5

    def __post_init__(self) -> None:
        if not isinstance(self.frame_count, int) or self.frame_count < 1:
            raise ConfigError(f"frame_count must be an integer >= 1, got {self.frame_count!r}")
        if not 0.0 <= self.redundancy_ratio <= 1.0:
            raise ConfigError(f"redundancy_ratio must lie in [0, 1], got {self.redundancy_ratio!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


def _check_geometry(width: int, height: int) -> None:
    if width < 1 or height < 1:
        raise ConfigError(f"frame geometry must be at least 1x1, got {width}x{height}")


# -- raw sequences ----------------------------------------------------------


def read_raw_sequence(path: PathLike, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
                      clock=None) -> Iterator[Frame]:
    """Stream frames from a headerless file of concatenated 8-bit frames.

    The file is validated before the first frame is produced: a missing file
    raises ``FileNotFoundError`` and a size that is not a whole number of
    frames raises :class:`FormatError`. An empty file yields nothing.
    """
    _check_geometry(width, height)
    path = Path(path)
    size = path.stat().st_size
    frame_bytes = width * height
    residue = size % frame_bytes
    if residue:
        raise FormatError(
            f"{path}: size {size} is not a multiple of the {width}x{height} frame size "
            f"({frame_bytes} bytes); {residue} trailing bytes"
        )
    return _iter_raw(path, width, height, clock or VirtualClock())


def _iter_raw(path: Path, width: int, height: int, clock) -> Iterator[Frame]:
    frame_bytes = width * height
    with open(path, "rb") as fh:
        index = 0
        while True:
            chunk = fh.read(frame_bytes)
            if not chunk:
                return
            if len(chunk) != frame_bytes:
                raise FormatError(f"{path}: truncated frame {index}")
            pixels = np.frombuffer(chunk, dtype=np.uint8).reshape(height, width)
            yield Frame(index, clock.stamp(index), pixels)
            index += 1


def write_raw_sequence(frames: Iterable[Frame], fh: BinaryIO) -> int:
    n = 0
    for frame in frames:
        fh.write(frame.tobytes())
        n += 1
    return n


# -- Y4M --------------------------------------------------------------------

Y4M_MAGIC = b"YUV4MPEG2"
_C420 = {"420", "420jpeg", "420paldv", "420mpeg2"}
_MAX_HEADER = 4096


def _parse_y4m_header(line: bytes, path: PathLike) -> tuple[int, int, str]:
    tokens = line.split()
    if not tokens or tokens[0] != Y4M_MAGIC:
        raise FormatError(f"{path}: not a Y4M stream")
    width = height = None
    colorspace = "420jpeg"
    for tok in tokens[1:]:
        tag, value = chr(tok[0]), tok[1:].decode("ascii", "replace")
        try:
            if tag == "W":
                width = int(value)
            elif tag == "H":
                height = int(value)
        except ValueError:
            raise FormatError(f"{path}: malformed Y4M header field {tok!r}") from None
        if tag == "C":
            colorspace = value
    if width is None or height is None or width < 1 or height < 1:
        raise FormatError(f"{path}: Y4M header must declare positive W and H")
    if colorspace != "mono" and colorspace not in _C420:
        raise FormatError(f"{path}: unsupported Y4M colorspace C{colorspace} (only C420 and Cmono)")
    return width, height, colorspace


def read_y4m(path: PathLike, clock=None) -> Iterator[Frame]:
    """Stream the luma plane of each frame of an uncompressed Y4M file.

    Accepts 4:2:0 (any siting variant) and mono streams; chroma is skipped.
    The stream header is checked before the first frame is produced.
    """
    path = Path(path)
    fh = open(path, "rb")
    try:
        header = fh.readline(_MAX_HEADER)
        if not header.endswith(b"\n"):
            if not header.startswith(Y4M_MAGIC):
                raise FormatError(f"{path}: not a Y4M stream")
            raise FormatError(f"{path}: unterminated Y4M stream header")
        width, height, colorspace = _parse_y4m_header(header, path)
    except BaseException:
        fh.close()
        raise
    return _iter_y4m(fh, path, width, height, colorspace, clock or VirtualClock())


def _iter_y4m(fh: BinaryIO, path: Path, width: int, height: int, colorspace: str,
              clock) -> Iterator[Frame]:
    luma = width * height
    chroma = 0 if colorspace == "mono" else 2 * ((width + 1) // 2) * ((height + 1) // 2)
    with fh:
        index = 0
        while True:
            marker = fh.readline(_MAX_HEADER)
            if not marker:
                return
            if not marker.startswith(b"FRAME") or not marker.endswith(b"\n"):
                raise FormatError(f"{path}: bad FRAME marker at frame {index}")
            payload = fh.read(luma + chroma)
            if len(payload) != luma + chroma:
                raise FormatError(
                    f"{path}: truncated frame payload at frame {index} "
                    f"({len(payload)} of {luma + chroma} bytes)"
                )
            pixels = np.frombuffer(payload, dtype=np.uint8, count=luma).reshape(height, width)
            yield Frame(index, clock.stamp(index), pixels)
            index += 1


def write_y4m(frames: Iterable[Frame], fh: BinaryIO, fps: tuple[int, int] = (30, 1)) -> int:
    """Write frames as a ``Cmono`` Y4M stream; geometry comes from the first frame."""
    n = 0
    for frame in frames:
        if n == 0:
            fh.write(b"YUV4MPEG2 W%d H%d F%d:%d Ip A1:1 Cmono\n" % (frame.width, frame.height, *fps))
        fh.write(b"FRAME\n")
        fh.write(frame.tobytes())
        n += 1
    return n


# -- synthetic scenes -------------------------------------------------------

_RECT_VALUE = 255
_TEXTURE_NOISE = 48


def _background(rng: SplitMix64, width: int, height: int) -> np.ndarray:
    # horizontal ramp over 0..191 plus uniform grain; never reaches the rectangle value
    ramp = (np.arange(width, dtype=np.int64) * 192) // width
    grain = rng.below(_TEXTURE_NOISE, width * height).reshape(height, width)
    return (ramp[None, :] + grain).astype(np.uint8)


def _rect_geometry(width: int, height: int) -> tuple[int, int, int]:
    rw = max(1, width // 8)
    rh = max(1, height // 4)
    return rw, rh, (height - rh) // 2


def object_position(step: int, width: int, height: int) -> BBox:
    """Bounding box of the moving rectangle after ``step`` one-pixel moves.

    The rectangle bounces between the left and right edges.
    """
    rw, rh, y0 = _rect_geometry(width, height)
    span = width - rw
    if span == 0:
        x = 0
    else:
        phase = step % (2 * span)
        x = phase if phase <= span else 2 * span - phase
    return (x, y0, rw, rh)


def _moving_frame(background: np.ndarray, step: int) -> tuple[np.ndarray, BBox]:
    height, width = background.shape
    bbox = object_position(step, width, height)
    x, y, w, h = bbox
    pixels = background.copy()
    pixels[y:y + h, x:x + w] = _RECT_VALUE
    return pixels, bbox


def repeat_positions(spec: SceneSpec) -> set[int]:
    """Frame indices that duplicate their predecessor in a composite scene.

    ``round(redundancy_ratio * frame_count)`` positions, capped at
    ``frame_count - 1`` because frame 0 has no predecessor.
    """
    n = spec.frame_count
    k = min(int(spec.redundancy_ratio * n + 0.5), n - 1)
    if k == 0:
        return set()
    # a separate stream so the background texture does not depend on the ratio
    keys = SplitMix64(spec.seed ^ 0xC0FFEE).u64(n - 1)
    order = np.argsort(keys, kind="stable")
    return {int(i) + 1 for i in order[:k]}


def generate_scene(spec: SceneSpec, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
                   clock=None) -> Iterator[Frame]:
    """Deterministic synthetic stream for ``spec`` at the given geometry.

    * static: one textured frame repeated ``frame_count`` times
    * moving: a bright rectangle moving one pixel per frame over a texture
    * noise: independent uniform noise in every frame
    * composite: moving-object frames, with exact repeats of the predecessor
      at ``redundancy_ratio`` of the positions
    """
    _check_geometry(width, height)
    clock = clock or VirtualClock()
    rng = SplitMix64(spec.seed)
    n = spec.frame_count

    if spec.kind is SceneKind.NOISE:
        for i in range(n):
            pixels = rng.bytes(width * height).reshape(height, width)
            yield Frame(i, clock.stamp(i), pixels)
        return

    background = _background(rng, width, height)
    if spec.kind is SceneKind.STATIC:
        background.setflags(write=False)
        for i in range(n):
            yield Frame(i, clock.stamp(i), background)
        return

    repeats = repeat_positions(spec) if spec.kind is SceneKind.COMPOSITE else set()
    step = 0
    previous: Optional[Frame] = None
    for i in range(n):
        if i in repeats and previous is not None:
            frame = Frame(i, clock.stamp(i), previous.pixels, previous.truth)
        else:
            pixels, bbox = _moving_frame(background, step)
            pixels.setflags(write=False)
            step += 1
            frame = Frame(i, clock.stamp(i), pixels, bbox)
        previous = frame
        yield frame

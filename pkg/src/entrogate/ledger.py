"""Per-frame run records and their CSV form.

CSV column order is frozen::

    frame_id, capture_time_ns, entropy_bits, delta_h_bits, priority,
    decision, buffer_enter_ns, infer_start_ns, infer_end_ns

Timestamps are integer nanoseconds; absent times are empty cells. Floats are
written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from entrogate.errors import FormatError

COLUMNS = (
    "frame_id",
    "capture_time_ns",
    "entropy_bits",
    "delta_h_bits",
    "priority",
    "decision",
    "buffer_enter_ns",
    "infer_start_ns",
    "infer_end_ns",
)


class Outcome(enum.Enum):
    """Terminal state of a frame.

    ``KEPT`` marks a frame that passed the gate but was still in flight when
    the run stopped; a clean shutdown never leaves one behind.
    """

    KEPT = "kept"
    DROPPED = "dropped"
    EVICTED = "evicted_from_buffer"
    REJECTED = "rejected_at_buffer"
    INFERRED = "inferred"
    FAILED = "failed"


@dataclass(frozen=True)
class FrameRecord:
    frame_id: int
    capture_time: int
    entropy: float
    delta_h: float
    priority: float
    decision: Outcome
    buffer_enter_time: Optional[int] = None
    inference_start_time: Optional[int] = None
    inference_end_time: Optional[int] = None

    @property
    def end_to_end_ns(self) -> Optional[int]:
        if self.decision is not Outcome.INFERRED:
            return None
        return self.inference_end_time - self.capture_time

    @property
    def staleness_ns(self) -> Optional[int]:
        if self.decision is not Outcome.INFERRED:
            return None
        return self.inference_start_time - self.capture_time

    def row(self) -> list[str]:
        def t(v: Optional[int]) -> str:
            return "" if v is None else str(v)

        return [
            str(self.frame_id),
            str(self.capture_time),
            repr(self.entropy),
            repr(self.delta_h),
            repr(self.priority),
            self.decision.value,
            t(self.buffer_enter_time),
            t(self.inference_start_time),
            t(self.inference_end_time),
        ]


def ledger_to_csv(records: Iterable[FrameRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def _parse_row(row: dict[str, str], line: int) -> FrameRecord:
    def opt(name: str) -> Optional[int]:
        v = row[name]
        return int(v) if v != "" else None

    try:
        return FrameRecord(
            frame_id=int(row["frame_id"]),
            capture_time=int(row["capture_time_ns"]),
            entropy=float(row["entropy_bits"]),
            delta_h=float(row["delta_h_bits"]),
            priority=float(row["priority"]),
            decision=Outcome(row["decision"]),
            buffer_enter_time=opt("buffer_enter_ns"),
            inference_start_time=opt("infer_start_ns"),
            inference_end_time=opt("infer_end_ns"),
        )
    except (ValueError, TypeError) as exc:
        raise FormatError(f"line {line}: {exc}") from None


def read_ledger_csv(path: str | Path) -> list[FrameRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        for i, expected in enumerate(COLUMNS):
            if i >= len(header) or header[i] != expected:
                found = header[i] if i < len(header) else "<missing>"
                raise FormatError(f"{path}: column {i + 1} should be {expected!r}, found {found!r}")
        if len(header) > len(COLUMNS):
            raise FormatError(f"{path}: unexpected extra column {header[len(COLUMNS)]!r}")
        return [_parse_row(row, n) for n, row in enumerate(reader, start=2)]

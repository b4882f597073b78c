"""``entrogate`` command line: run, ablate, synth, stats.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Reports are written atomically (temporary file, then rename).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Any, Optional, Sequence

from entrogate import config as cfgmod
from entrogate.entropy import StreamScorer
from entrogate.errors import ConfigError, EntrogateError
from entrogate.ledger import Outcome, ledger_to_csv, read_ledger_csv
from entrogate.pipeline import (
    LATENCY_SD_REFERENCE_MS,
    paired_samples,
    run,
    run_ablation_pair,
    segment_ledger,
)
from entrogate.stats import paired_t_test, summarize
from entrogate.video_io import generate_scene, write_raw_sequence, write_y4m

log = logging.getLogger("entrogate")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 already; keep the message terse
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- argument parsing -------------------------------------------------------


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="TOML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, help="weight of spatial entropy")
    p.add_argument("--beta", type=float, help="weight of entropy change")
    p.add_argument("--threshold", type=float, help="priority cutoff; lower scores are dropped")
    p.add_argument("--buffer-capacity", type=int)
    p.add_argument("--virtual-clock", metavar="DUR", help="virtual clock with this tick, e.g. 33ms")
    p.add_argument("--monotonic-clock", action="store_true", help="use real time instead")
    p.add_argument("--scene", choices=["static", "moving", "noise", "composite"])
    p.add_argument("--redundancy", type=float, metavar="R")
    p.add_argument("--frames", type=int, metavar="N")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--input", metavar="PATH", help=".y4m or raw grayscale file")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--segments", type=int, metavar="N")
    p.add_argument("--base-latency", metavar="DUR", help="stub detector latency")
    p.add_argument("--jitter", metavar="DUR", help="stub detector latency half-width")
    p.add_argument("--synthetic-truth", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="entrogate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one stream through the pipeline")
    _shared(p)
    p.add_argument("--no-gating", action="store_true", help="disable entropy gating")

    p = sub.add_parser("ablate", help="run gated and ungated and compare")
    _shared(p)

    p = sub.add_parser("synth", help="write a synthetic scene to a raw or .y4m file")
    _shared(p)
    p.add_argument("-o", "--output", metavar="PATH", required=True)
    p.add_argument("--inspect", action="store_true", help="print per-frame entropy")

    p = sub.add_parser("stats", help="summarize ledgers and pair two of them")
    p.add_argument("ledgers", nargs="+", metavar="LEDGER")
    p.add_argument("--segments", type=int, default=10, metavar="N")
    p.add_argument("--out", metavar="DIR", default=".")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    clock: dict[str, Any] = {}
    if args.monotonic_clock:
        clock["mode"] = "monotonic"
    if args.virtual_clock is not None:
        if args.monotonic_clock:
            raise UsageError("--virtual-clock and --monotonic-clock are mutually exclusive")
        clock.update(mode="virtual", tick=args.virtual_clock)
    gate: dict[str, Any] = {"alpha": args.alpha, "beta": args.beta, "threshold": args.threshold}
    if getattr(args, "no_gating", False):
        gate["enabled"] = False
    return {
        "seed": args.seed,
        "segments": args.segments,
        "gate": gate,
        "buffer": {"capacity": args.buffer_capacity},
        "clock": clock,
        "source": {
            "scene": args.scene,
            "frames": args.frames,
            "redundancy": args.redundancy,
            "width": args.width,
            "height": args.height,
            "input": args.input,
        },
        "detector": {
            "base_latency": args.base_latency,
            "jitter": args.jitter,
            "synthetic_truth": args.synthetic_truth,
        },
        "output": {"dir": args.out},
    }


def _resolved(args: argparse.Namespace) -> dict:
    values = cfgmod.resolve(cfgmod.load_file(args.config), _overrides(args))
    log.debug("effective config: %s", values)
    return values


def _config_echo(values: dict) -> dict:
    return {k: v for k, v in values.items() if k != "output"}


# -- commands ---------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    values = _resolved(args)
    pcfg = cfgmod.build_pipeline_config(values)
    result = run(pcfg)
    out = Path(values["output"]["dir"])
    report = result.metrics.to_dict()
    report["config"] = _config_echo(values)
    atomic_write(out / "ledger.csv", ledger_to_csv(result.ledger))
    atomic_write(out / "metrics.json", dump_json(report))
    m = result.metrics
    print(
        f"ingested={m.frames_ingested} inferred={m.frames_inferred} "
        f"dropped={m.frames_dropped_at_gate} evicted={m.frames_evicted} "
        f"rejected={m.frames_rejected} -> {out}"
    )
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    values = _resolved(args)
    pcfg = cfgmod.build_pipeline_config(values)
    result = run_ablation_pair(pcfg, segments=cfgmod.segments_of(values))
    out = Path(values["output"]["dir"])
    for name, r in (("gated", result.gated), ("ungated", result.ungated)):
        atomic_write(out / name / "ledger.csv", ledger_to_csv(r.ledger))
        atomic_write(out / name / "metrics.json", dump_json(r.metrics.to_dict()))
    report = result.to_dict()
    report["config"] = _config_echo(values)
    atomic_write(out / "ablation.json", dump_json(report))
    delta = result.processing_delta_pct
    test = result.latency_test
    print(
        f"inference calls gated={result.gated.metrics.frames_inferred} "
        f"ungated={result.ungated.metrics.frames_inferred}; "
        f"throughput delta={'n/a' if delta is None else f'{delta:+.1f}%'}; "
        f"latency p={'n/a' if test is None else f'{test.p_value_two_tailed:.3g}'} -> {out}"
    )
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    values = _resolved(args)
    if values["source"]["input"]:
        raise UsageError("synth generates a scene; --input does not apply")
    pcfg = cfgmod.build_pipeline_config(values)
    src = pcfg.source
    frames = list(generate_scene(src.scene, src.width, src.height))
    target = Path(args.output)
    buf = io.BytesIO()
    if target.suffix.lower() == ".y4m":
        write_y4m(frames, buf)
    else:
        write_raw_sequence(frames, buf)
    atomic_write(target, buf.getvalue())
    if args.inspect:
        scorer = StreamScorer(pcfg.gate)
        print("frame_id\tentropy_bits\tdelta_h_bits\tpriority")
        for f in frames:
            s = scorer.score(f.pixels)
            print(f"{f.frame_id}\t{s.h:.6f}\t{s.delta_h:.6f}\t{s.p:.6f}")
    return EXIT_OK


def _ledger_summary(path: str, ledger: list, segments: int) -> dict:
    counts = {o.value: 0 for o in Outcome}
    for r in ledger:
        counts[r.decision.value] += 1
    e2e = [r.end_to_end_ns / 1e6 for r in ledger if r.decision is Outcome.INFERRED]
    stale = [r.staleness_ns / 1e6 for r in ledger if r.decision is Outcome.INFERRED]
    e2e_summary = summarize(e2e).to_dict() if e2e else None
    sd = e2e_summary["sd"] if e2e_summary else None
    return {
        "path": path,
        "frames": len(ledger),
        "decisions": counts,
        "end_to_end_latency_ms": e2e_summary,
        "staleness_ms": summarize(stale).to_dict() if stale else None,
        "segments": [asdict(s) for s in segment_ledger(ledger, segments)] if ledger else [],
        "latency_sd_reference_ms": LATENCY_SD_REFERENCE_MS,
        "latency_sd_within_reference": None if sd is None else sd < LATENCY_SD_REFERENCE_MS,
    }


def cmd_stats(args: argparse.Namespace) -> int:
    if args.segments < 1:
        raise ConfigError(f"segments must be >= 1, got {args.segments}")
    ledgers = [read_ledger_csv(p) for p in args.ledgers]
    report: dict[str, Any] = {
        "schema": "entrogate.stats/1",
        "ledgers": [_ledger_summary(p, l, args.segments) for p, l in zip(args.ledgers, ledgers)],
        "paired_latency_test": None,
    }
    if len(ledgers) == 2:
        sa = segment_ledger(ledgers[0], args.segments) if ledgers[0] else []
        sb = segment_ledger(ledgers[1], args.segments) if ledgers[1] else []
        if len(sa) != len(sb):
            raise EntrogateError(
                f"cannot pair ledgers: {len(sa)} vs {len(sb)} segments; "
                "the paired test needs the same segment count on both sides"
            )
        xs, ys = paired_samples(sa, sb, "mean_latency_ms")
        if len(xs) >= 2:
            report["paired_latency_test"] = paired_t_test(xs, ys).to_dict()
        report["paired_segments"] = len(xs)
    target = Path(args.out) / "stats.json"
    atomic_write(target, dump_json(report))
    print(f"wrote {target}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "ablate": cmd_ablate, "synth": cmd_synth, "stats": cmd_stats}


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("ENTROGATE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"entrogate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EntrogateError, OSError) as exc:
        print(f"entrogate: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

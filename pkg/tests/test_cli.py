from __future__ import annotations

import hashlib
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from entrogate import cli
from entrogate.cli import atomic_write, main
from entrogate.config import DEFAULTS
from oracles import read_ledger_rows

SMALL = ["--width", "32", "--height", "24"]


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def processing_fps_from_rows(rows) -> float:
    busy = sum(int(r["infer_end_ns"]) - int(r["infer_start_ns"]) for r in rows if r["infer_start_ns"])
    return len(rows) / (busy / 1e9)


class TestExitCodes:
    def test_negative_alpha(self, tmp_path, capsys):
        assert main(["run", "--alpha", "-1", "--out", str(tmp_path)]) == 2
        assert "alpha" in capsys.readouterr().err

    def test_missing_input(self, tmp_path, capsys):
        missing = tmp_path / "missing.y4m"
        assert main(["run", "--input", str(missing), "--out", str(tmp_path / "o")]) == 1
        assert "missing.y4m" in capsys.readouterr().err

    def test_synth_zero_frames(self, tmp_path):
        assert main(["synth", "--frames", "0", "-o", str(tmp_path / "x.raw")]) == 2
        assert not (tmp_path / "x.raw").exists()

    def test_bad_toml_reports_position(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("[gate]\nalpha = = 1\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "line 2" in err and "column" in err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "typo.toml"
        cfg.write_text("[gate]\nalfa = 0.5\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "gate.alfa" in capsys.readouterr().err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--gamma", "1"])
        assert exc.value.code == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 2

    def test_clock_flags_conflict(self, tmp_path):
        assert main(["run", "--virtual-clock", "33ms", "--monotonic-clock", "--out", str(tmp_path)]) == 2

    def test_bad_duration(self, tmp_path):
        assert main(["run", "--virtual-clock", "fast", "--out", str(tmp_path)]) == 2

    def test_jitter_above_base(self, tmp_path):
        assert main(["run", "--base-latency", "5ms", "--jitter", "6ms", "--out", str(tmp_path)]) == 2

    def test_unwritable_synth_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["synth", "--frames", "2", *SMALL, "-o", str(blocker / "x.raw")]) == 1

    def test_stats_schema_mismatch(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("frame_id,capture_ns\n0,0\n")
        assert main(["stats", str(bad), "--out", str(tmp_path)]) == 1
        assert "capture_time_ns" in capsys.readouterr().err


class TestPrecedence:
    def test_three_layers(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('[gate]\nalpha = 0.9\nbeta = 0.7\n[source]\nframes = 7\nscene = "static"\n')
        flags = ["--beta", "0.2", "--frames", "5", *SMALL]
        values = cli._resolved(cli.build_parser().parse_args(["run", "--config", str(cfg), *flags]))
        assert values["gate"]["alpha"] == 0.9  # file
        assert values["gate"]["beta"] == 0.2  # flag beats file
        assert values["gate"]["threshold"] == 3.0  # default
        assert values["source"]["frames"] == 5
        assert values["source"]["scene"] == "static"

    def test_empty_file_is_defaults(self, tmp_path):
        cfg = tmp_path / "empty.toml"
        cfg.write_text("# nothing\n")
        values = cli._resolved(cli.build_parser().parse_args(["run", "--config", str(cfg)]))
        assert values == DEFAULTS

    def test_report_echoes_effective_config(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[gate]\nthreshold = 2.5\n")
        out = tmp_path / "o"
        assert main(["run", "--config", str(cfg), "--frames", "3", *SMALL, "--out", str(out)]) == 0
        report = json.loads((out / "metrics.json").read_text())
        assert report["config"]["gate"]["threshold"] == 2.5
        assert report["config"]["source"]["frames"] == 3


class TestRun:
    def test_composite_hundred(self, tmp_path):
        out = tmp_path / "o"
        args = ["run", "--scene", "composite", "--redundancy", "0.5", "--frames", "100",
                "--virtual-clock", "33ms", *SMALL, "--out", str(out)]
        assert main(args) == 0
        report = json.loads((out / "metrics.json").read_text())
        assert report["frames_ingested"] == 100
        assert report["schema"] == "entrogate.metrics/1"
        rows = read_ledger_rows(out / "ledger.csv")
        assert len(rows) == 100
        assert list(rows[0]) == [
            "frame_id", "capture_time_ns", "entropy_bits", "delta_h_bits", "priority",
            "decision", "buffer_enter_ns", "infer_start_ns", "infer_end_ns",
        ]

    def test_no_gating_flag(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", "--no-gating", "--threshold", "8", "--frames", "20", *SMALL, "--out", str(out)]) == 0
        report = json.loads((out / "metrics.json").read_text())
        assert report["frames_dropped_at_gate"] == 0 and report["gating_enabled"] is False

    def test_y4m_input(self, tmp_path):
        clip = tmp_path / "clip.y4m"
        assert main(["synth", "--scene", "moving", "--frames", "6", *SMALL, "-o", str(clip)]) == 0
        out = tmp_path / "o"
        assert main(["run", "--input", str(clip), "--out", str(out)]) == 0
        assert json.loads((out / "metrics.json").read_text())["frames_ingested"] == 6

    def test_byte_identical_reruns(self, tmp_path):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert main(["run", "--frames", "40", "--jitter", "3ms", *SMALL, "--out", str(out)]) == 0
        for name in ("ledger.csv", "metrics.json"):
            assert sha(outs[0] / name) == sha(outs[1] / name)


class TestAblate:
    def test_composite_delta_matches_ledgers(self, tmp_path):
        out = tmp_path / "ab"
        args = ["ablate", "--scene", "composite", "--redundancy", "0.5", "--frames", "100",
                "--alpha", "0", "--beta", "1", "--threshold", "1e-9", *SMALL, "--out", str(out)]
        assert main(args) == 0
        report = json.loads((out / "ablation.json").read_text())
        g = processing_fps_from_rows(read_ledger_rows(out / "gated" / "ledger.csv"))
        u = processing_fps_from_rows(read_ledger_rows(out / "ungated" / "ledger.csv"))
        assert report["throughput_delta_pct"] > 0
        assert report["throughput_delta_pct"] == pytest.approx((g - u) / u * 100, abs=1e-9)
        assert report["paired_latency_test"] is not None
        assert len(report["segments"]["gated"]) == 10

    @pytest.mark.parametrize("scene", ["static", "noise"])
    def test_zero_threshold_no_delta(self, tmp_path, scene):
        out = tmp_path / scene
        assert main(["ablate", "--scene", scene, "--threshold", "0", "--frames", "30", *SMALL,
                     "--out", str(out)]) == 0
        report = json.loads((out / "ablation.json").read_text())
        calls = report["inference_calls"]
        assert calls["gated"] == calls["ungated"]
        assert report["throughput_delta_pct"] == 0.0


class TestSynth:
    def test_static_default_geometry_size(self, tmp_path):
        target = tmp_path / "s.raw"
        assert main(["synth", "--scene", "static", "--frames", "10", "-o", str(target)]) == 0
        assert target.stat().st_size == 768_000

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.raw", tmp_path / "b.raw"
        for t in (a, b):
            assert main(["synth", "--scene", "composite", "--frames", "12", *SMALL, "-o", str(t)]) == 0
        assert sha(a) == sha(b)

    def test_inspect_table(self, tmp_path, capsys):
        assert main(["synth", "--scene", "static", "--frames", "3", *SMALL, "--inspect",
                     "-o", str(tmp_path / "s.raw")]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].split("\t") == ["frame_id", "entropy_bits", "delta_h_bits", "priority"]
        assert len(lines) == 4
        assert lines[2].split("\t")[2] == "0.000000"

    def test_input_rejected(self, tmp_path):
        assert main(["synth", "--input", "x.raw", "-o", str(tmp_path / "s.raw")]) == 2


class TestStats:
    @pytest.fixture()
    def ablation(self, tmp_path):
        out = tmp_path / "ab"
        assert main(["ablate", "--frames", "60", "--alpha", "0", "--beta", "1", "--threshold", "1e-9",
                     "--base-latency", "45ms", "--jitter", "5ms", "--buffer-capacity", "4",
                     *SMALL, "--out", str(out)]) == 0
        return out

    def test_two_ledgers(self, ablation, tmp_path):
        out = tmp_path / "st"
        assert main(["stats", str(ablation / "gated" / "ledger.csv"), str(ablation / "ungated" / "ledger.csv"),
                     "--out", str(out)]) == 0
        report = json.loads((out / "stats.json").read_text())
        test = report["paired_latency_test"]
        assert test is not None and test["n"] == 10 and test["degrees_of_freedom"] == 9
        assert len(report["ledgers"]) == 2

    def test_one_ledger(self, ablation, tmp_path):
        out = tmp_path / "st"
        assert main(["stats", str(ablation / "gated" / "ledger.csv"), "--out", str(out)]) == 0
        report = json.loads((out / "stats.json").read_text())
        assert report["paired_latency_test"] is None
        assert report["ledgers"][0]["end_to_end_latency_ms"]["count"] > 0

    def test_segment_mismatch(self, ablation, tmp_path, capsys):
        short = tmp_path / "short"
        assert main(["run", "--frames", "4", *SMALL, "--out", str(short)]) == 0
        code = main(["stats", str(ablation / "gated" / "ledger.csv"), str(short / "ledger.csv"),
                     "--out", str(tmp_path)])
        assert code == 1
        assert "segment" in capsys.readouterr().err


class TestAtomicWrite:
    def test_interrupted_write_leaves_old_file(self, tmp_path, monkeypatch):
        target = tmp_path / "r.json"
        target.write_text("old")

        def boom(src, dst):
            raise KeyboardInterrupt

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(KeyboardInterrupt):
            atomic_write(target, "new contents")
        assert target.read_text() == "old"
        assert [p.name for p in tmp_path.iterdir()] == ["r.json"]

    def test_creates_parents(self, tmp_path):
        target = tmp_path / "a" / "b" / "c.txt"
        atomic_write(target, b"xyz")
        assert target.read_bytes() == b"xyz"


def test_console_script_entry(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "entrogate.cli", "synth", "--frames", "2", *SMALL, "-o", str(tmp_path / "s.raw")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "s.raw").stat().st_size == 2 * 32 * 24


def test_log_level_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ENTROGATE_LOG", "not-a-level")
    assert main(["synth", "--frames", "1", *SMALL, "-o", str(tmp_path / "s.raw")]) == 0

"""CLI surface tests: sub-commands, exit codes, delimited outputs, figures."""

import json

import numpy as np
import pytest

from teleopkit.cli import main
from teleopkit.episode import read_episode
from teleopkit.server import DEFAULT_LIMITS, Server


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    lines = [json.loads(l) for l in out.out.strip().splitlines() if l.strip()]
    return code, lines


@pytest.fixture
def det_server(composite19):
    srv = Server(composite19, DEFAULT_LIMITS, port=0, mode="deterministic").start()
    yield srv
    srv.stop()


class TestUsage:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as ei:
            main([])
        assert ei.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as ei:
            main(["retarget", "--bogus"])
        assert ei.value.code == 2

    def test_runtime_error_is_exit_3(self, capsys):
        code = main(["retarget", "--input", "does_not_exist.jsonl",
                     "--out", "/tmp/x.jsonl"])
        assert code == 3
        err = capsys.readouterr().err
        assert json.loads(err)["event"] == "error"


class TestServe:
    def test_ready_line(self, capsys):
        code, lines = run_cli(capsys, "serve", "--deterministic", "--port", "0",
                              "--once")
        assert code == 0
        assert lines[0]["event"] == "ready"
        assert lines[0]["mode"] == "deterministic"
        assert lines[0]["port"] > 0


class TestRetarget:
    def test_one_line_per_frame(self, capsys, tmp_path):
        out = tmp_path / "actions.jsonl"
        code, lines = run_cli(capsys, "retarget",
                              "--input", "fixtures/stream_wave_3s.jsonl",
                              "--out", str(out))
        assert code == 0
        assert lines[-1]["frames"] == 90
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 90
        assert len(rows[0]["q"]) == 12

    def test_plot_dir_renders_figure(self, capsys, tmp_path):
        out = tmp_path / "a.jsonl"
        plots = tmp_path / "figs"
        code, _ = run_cli(capsys, "retarget",
                          "--input", "fixtures/stream_wave_3s.jsonl",
                          "--out", str(out), "--plot-dir", str(plots))
        assert code == 0
        assert (plots / "retarget_joints.png").stat().st_size > 1000

    def test_openxr_input(self, capsys, tmp_path):
        out = tmp_path / "a.jsonl"
        code, lines = run_cli(capsys, "retarget",
                              "--input", "fixtures/openxr26_wave.jsonl",
                              "--openxr", "--out", str(out))
        assert code == 0
        assert lines[-1]["frames"] == 90


class TestIk:
    def test_solutions_per_frame(self, capsys, tmp_path):
        out = tmp_path / "ik.jsonl"
        code, lines = run_cli(capsys, "ik",
                              "--targets", "fixtures/stream_wave_3s.jsonl",
                              "--out", str(out))
        assert code == 0
        assert lines[-1]["solved"] + lines[-1]["unreachable"] == 90
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        solved = [r for r in rows if "q" in r]
        assert all(len(r["q"]) == 7 for r in solved)
        assert all(r["position_err"] <= 1e-4 for r in solved)


class TestTeleopAndReplay:
    def test_offline_teleop_writes_actions(self, capsys, tmp_path):
        out = tmp_path / "acts.jsonl"
        code, lines = run_cli(capsys, "teleop", "--config", "fixtures/session.json",
                              "--input", "fixtures/stream_wave_3s.jsonl",
                              "--out", str(out))
        assert code == 0
        assert lines[-1]["event"] == "teleop-offline"
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 90 and len(rows[0]["targets"]) == 19

    def test_teleop_record_then_replay(self, capsys, tmp_path, det_server):
        ep = tmp_path / "ep"
        code, lines = run_cli(capsys, "teleop", "--config", "fixtures/session.json",
                              "--input", "fixtures/stream_wave_3s.jsonl",
                              "--addr", f"127.0.0.1:{det_server.port}",
                              "--record", str(ep), "--episode-id", "cli-test")
        assert code == 0
        assert lines[-1]["episode_steps"] == 90
        meta, steps = read_episode(ep)
        assert meta["episode_id"] == "cli-test"

        srv2 = Server(det_server.core.model, DEFAULT_LIMITS, port=0,
                      mode="deterministic").start()
        try:
            code, lines = run_cli(capsys, "replay", "--episode", str(ep),
                                  "--to", f"127.0.0.1:{srv2.port}")
            assert code == 0
            assert lines[-1]["steps"] == 90
        finally:
            srv2.stop()


class TestBench:
    def test_latency_summary(self, capsys, tmp_path, det_server):
        plots = tmp_path / "figs"
        code, lines = run_cli(capsys, "bench-latency",
                              "--addr", f"127.0.0.1:{det_server.port}",
                              "--n", "300", "--plot-dir", str(plots))
        assert code == 0
        stats = lines[-1]
        assert stats["n"] == 300
        assert stats["p50_us"] <= stats["p99_us"]
        assert (plots / "latency_hist.png").exists()

"""Command-line tests: flags, exit codes, golden outputs, determinism."""
from __future__ import annotations

import json
import logging
import os
import stat
import threading
from pathlib import Path

import pytest

from fpmfp.cli import main

from conftest import FIXTURES

GOLDEN = Path(__file__).resolve().parent / "golden"


def fix(name: str) -> str:
    return str(FIXTURES / f"{name}.mir")


def golden(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestUsageErrors:
    def test_no_subcommand(self, capsys):
        code, _, err = run(capsys)
        assert code == 64
        assert "usage" in err

    def test_unknown_subcommand(self, capsys):
        code, _, err = run(capsys, "frobnicate")
        assert code == 64
        assert "usage" in err

    def test_bad_analysis_choice(self, capsys):
        code, _, err = run(capsys, "analyze", "--program", fix("fig2"),
                           "--analysis", "bogus", "--mode", "mfp")
        assert code == 64
        assert "invalid choice" in err

    def test_bad_opts_number(self, capsys):
        code, _, err = run(capsys, "analyze", "--program", fix("fig2"),
                           "--analysis", "rd", "--mode", "fpmfp",
                           "--opts", "9")
        assert code == 64
        assert "--opts" in err

    def test_bad_opts_text(self, capsys):
        code, _, err = run(capsys, "analyze", "--program", fix("fig2"),
                           "--analysis", "rd", "--mode", "fpmfp",
                           "--opts", "first")
        assert code == 64

    def test_missing_required_flag(self, capsys):
        code, _, err = run(capsys, "analyze", "--analysis", "rd",
                           "--mode", "mfp")
        assert code == 64
        assert "--program" in err

    def test_invalid_log_env(self, capsys, monkeypatch):
        monkeypatch.setenv("FPMFP_LOG", "chatty")
        code, _, err = run(capsys, "detect-mips", "--program", fix("fig2"))
        assert code == 64
        assert "FPMFP_LOG" in err

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "detect-mips" in capsys.readouterr().out


class TestInputErrors:
    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "analyze", "--program", "/no/such.mir",
                           "--analysis", "rd", "--mode", "mfp")
        assert code == 1
        assert "cannot read" in err

    def test_parse_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.mir"
        bad.write_text("proc main( {")
        code, _, err = run(capsys, "detect-mips", "--program", str(bad))
        assert code == 1
        assert "bad.mir" in err

    def test_special_file_destinations_are_written_through(
            self, capsys, tmp_path):
        # A FIFO (or device) target must not be replaced by a regular file.
        fifo = tmp_path / "sink"
        os.mkfifo(fifo)
        reader = threading.Thread(
            target=lambda: fifo.read_bytes(), daemon=True)
        reader.start()
        code, _, _ = run(capsys, "detect-mips", "--program", fix("fig2"),
                         "--output", str(fifo))
        reader.join(timeout=5)
        assert code == 0
        assert stat.S_ISFIFO(fifo.stat().st_mode)
        assert not list(tmp_path.glob("*.tmp*"))


class TestDetectMips:
    def test_fig12_matches_golden(self, capsys):
        code, out, _ = run(capsys, "detect-mips", "--program", fix("fig12"))
        assert code == 0
        assert out == golden("detect_mips_fig12.json")

    def test_output_file_matches_stdout(self, capsys, tmp_path):
        dest = tmp_path / "report.json"
        code, out, _ = run(capsys, "detect-mips", "--program", fix("fig12"),
                           "--output", str(dest))
        assert code == 0
        assert out == ""
        assert dest.read_text() == golden("detect_mips_fig12.json")
        assert not list(tmp_path.glob("*.tmp*"))

    def test_segment_free_program(self, capsys):
        code, out, _ = run(capsys, "detect-mips", "--program",
                           fix("straight"))
        assert code == 0
        data = json.loads(out)
        assert data == {"schema": 1, "mips": []}

    def test_dot_overlay_marks_roles(self, capsys, tmp_path):
        dest = tmp_path / "overlay.dot"
        code, _, _ = run(capsys, "detect-mips", "--program", fix("fig12"),
                         "--dot", str(dest))
        assert code == 0
        text = dest.read_text()
        assert 'label="e3: false, m1:start"' in text
        assert 'label="e8: true, m1:end"' in text
        assert 'label="e6: m1:inner"' in text


class TestAnalyze:
    def test_fig2_fpmfp_matches_golden(self, capsys):
        code, out, _ = run(capsys, "analyze", "--program", fix("fig2"),
                           "--analysis", "interval", "--mode", "fpmfp")
        assert code == 0
        assert out == golden("analyze_fig2_interval_fpmfp.json")

    def test_fig2_interval_mfp(self, capsys):
        code, out, _ = run(capsys, "analyze", "--program", fix("fig2"),
                           "--analysis", "interval", "--mode", "mfp")
        assert code == 0
        data = json.loads(out)
        assert data["schema"] == 1
        assert data["mode"] == "mfp"
        assert "edge_pairs" not in data
        assert "opts" not in data
        n6 = [r for r in data["solution"] if r["node"] == 6][0]
        assert n6 == {"proc": "f", "node": 6,
                      "in": {"a": [0, 5], "x": [5, 5]},
                      "out": {"a": [0, 5], "x": [5, 5]}}

    def test_rd_solution_encoding(self, capsys):
        code, out, _ = run(capsys, "analyze", "--program",
                           fix("sphinx_like"), "--analysis", "rd",
                           "--mode", "mfp")
        assert code == 0
        data = json.loads(out)
        n6 = [r for r in data["solution"] if r["node"] == 6][0]
        assert n6["in"] == [["x", 1], ["c", 2], ["x", 4]]

    def test_uninit_alias_reports_canonical_name(self, capsys):
        code, out, _ = run(capsys, "analyze", "--program",
                           fix("nlkain_like"), "--analysis", "uninit",
                           "--mode", "fpmfp")
        assert code == 0
        data = json.loads(out)
        assert data["analysis"] == "must-defined"
        n6 = [r for r in data["solution"] if r["node"] == 6][0]
        assert n6["in"] == ["c", "x"]

    def test_opts_do_not_change_the_folds(self, capsys):
        _, full, _ = run(capsys, "analyze", "--program", fix("fig8"),
                         "--analysis", "interval", "--mode", "fpmfp")
        _, none, _ = run(capsys, "analyze", "--program", fix("fig8"),
                         "--analysis", "interval", "--mode", "fpmfp",
                         "--opts", "none")
        full_data, none_data = json.loads(full), json.loads(none)
        assert full_data["opts"] == [1, 2, 3]
        assert none_data["opts"] == []
        assert full_data["solution"] == none_data["solution"]

    def test_deterministic_bytes(self, capsys):
        _, first, _ = run(capsys, "analyze", "--program", fix("fig8"),
                          "--analysis", "interval", "--mode", "fpmfp")
        _, second, _ = run(capsys, "analyze", "--program", fix("fig8"),
                           "--analysis", "interval", "--mode", "fpmfp")
        assert first == second


class TestCompare:
    def test_nlkain_uninit_table_matches_golden(self, capsys):
        code, out, _ = run(capsys, "compare", "--program",
                           fix("nlkain_like"), "--analysis", "uninit",
                           "--format", "table", "--no-timing")
        assert code == 0
        assert out == golden("compare_nlkain_uninit.txt")

    def test_sphinx_rd_json_attaches_def_use(self, capsys):
        code, out, _ = run(capsys, "compare", "--program",
                           fix("sphinx_like"), "--analysis", "rd",
                           "--no-timing")
        assert code == 0
        data = json.loads(out)
        assert data["schema"] == 1
        assert data["def_use"]["totals"] == {"mfp": 6, "fpmfp": 5}
        assert data["def_use"]["removed"] == [[4, 6, "x"]]
        assert data["def_use"]["reduction_percent"] == 16.67
        assert "times" not in data

    def test_interval_json_has_no_client_section(self, capsys):
        code, out, _ = run(capsys, "compare", "--program", fix("fig2"),
                           "--analysis", "interval", "--no-timing")
        assert code == 0
        data = json.loads(out)
        assert "def_use" not in data and "alarms" not in data
        assert 6 in data["strict_nodes"]

    def test_timing_present_by_default(self, capsys):
        code, out, _ = run(capsys, "compare", "--program", fix("fig2"),
                           "--analysis", "interval")
        assert code == 0
        data = json.loads(out)
        assert set(data["times"]) == {"mfp", "fpmfp"}

    def test_no_timing_is_byte_deterministic(self, capsys):
        args = ("compare", "--program", fix("fig4"), "--analysis",
                "interval", "--no-timing")
        _, first, _ = run(capsys, *args)
        _, second, _ = run(capsys, *args)
        assert first == second

    def test_segment_free_program(self, capsys):
        code, out, _ = run(capsys, "compare", "--program", fix("straight"),
                           "--analysis", "rd", "--no-timing")
        assert code == 0
        data = json.loads(out)
        assert data["segments"] == 0
        assert data["strict_nodes"] == []


class TestOracleCheck:
    def test_fixture_directory_passes(self, capsys):
        code, out, _ = run(capsys, "oracle-check", "--fixtures",
                           str(FIXTURES))
        assert code == 0
        data = json.loads(out)
        assert data["programs"] == len(list(FIXTURES.glob("*.mir")))
        assert data["violations"] == []

    def test_random_programs_pass_and_are_deterministic(self, capsys):
        args = ("oracle-check", "--random", "6", "--seed", "11")
        code, first, _ = run(capsys, *args)
        assert code == 0
        code, second, _ = run(capsys, *args)
        assert code == 0
        assert first == second
        assert json.loads(first)["programs"] == 6

    def test_jobs_do_not_change_the_report(self, capsys):
        _, serial, _ = run(capsys, "oracle-check", "--fixtures",
                           str(FIXTURES))
        _, parallel, _ = run(capsys, "oracle-check", "--fixtures",
                             str(FIXTURES), "--jobs", "4")
        assert serial == parallel

    def test_requires_some_input(self, capsys):
        code, _, err = run(capsys, "oracle-check")
        assert code == 64
        assert "--fixtures" in err

    def test_missing_directory(self, capsys):
        code, _, err = run(capsys, "oracle-check", "--fixtures",
                           "/no/such/dir")
        assert code == 1

    def test_unparsable_fixture_reports_violation(self, capsys, tmp_path):
        (tmp_path / "ok.mir").write_text(
            "proc main() { x = 1; print x; }\n")
        (tmp_path / "broken.mir").write_text("proc oops(")
        code, out, _ = run(capsys, "oracle-check", "--fixtures",
                           str(tmp_path))
        assert code == 2
        data = json.loads(out)
        assert data["violations"][0]["program"] == "broken.mir"
        assert data["violations"][0]["property"] == "parse"


class TestDumpDot:
    def test_fig3_matches_golden(self, capsys):
        code, out, _ = run(capsys, "dump-dot", "--program", fix("fig3"))
        assert code == 0
        assert out == golden("fig3.dot")

    def test_one_cluster_per_procedure(self, capsys):
        code, out, _ = run(capsys, "dump-dot", "--program", fix("fig7"))
        assert code == 0
        assert "subgraph cluster_0" in out
        assert "subgraph cluster_1" in out


class TestLogging:
    def test_info_level_logs_progress(self, capsys, monkeypatch, caplog):
        monkeypatch.setenv("FPMFP_LOG", "info")
        with caplog.at_level(logging.INFO, logger="fpmfp"):
            code, _, _ = run(capsys, "detect-mips", "--program",
                             fix("fig2"))
        assert code == 0
        assert any("segment" in rec.message for rec in caplog.records)

    def test_default_level_is_quiet(self, capsys, caplog):
        with caplog.at_level(logging.INFO, logger="fpmfp"):
            run(capsys, "detect-mips", "--program", fix("fig2"))
        # Level resets to "error" when the variable is unset.
        assert all(rec.levelno >= logging.ERROR for rec in caplog.records)

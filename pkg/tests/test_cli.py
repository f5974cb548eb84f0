"""Command-line behaviour: exit codes, output formats, determinism."""

from __future__ import annotations

import json
import re
import subprocess
import sys

import pytest

from helpers import ALL_POSITIVE, ROOT, corpus, negative, run_cli

DIAG_LINE = re.compile(r"^\S+:\d+:\d+: (error|warning) [A-Z_]+: .+$")


class TestCheck:
    @pytest.mark.parametrize("files", ALL_POSITIVE)
    def test_corpus_exits_zero(self, files):
        code, out = run_cli("check", *corpus(*files))
        assert code == 0, out

    @pytest.mark.parametrize("file, code, diag", [
        ("divergence_call.rfn", 1, "DIVERGENCE_CALL"),
        ("fig2_first_assume_asserted.rfn", 1, "REFUTED"),
        ("pivot_hi_mutant.rfn", 1, "REFUTED"),
        ("new_state_violation.rfn", 2, "NEW_STATE_VIOLATION"),
        ("illegal_break.rfn", 2, "ILLEGAL_BREAK"),
        ("strengthening_unprotected.rfn", 2, "STRENGTHENING_UNPROTECTED"),
        ("abstract_import.rfn", 2, "ABSTRACT_IMPORT_VIOLATION"),
        ("cyclic_import.rfn", 2, "CYCLIC_IMPORT"),
        ("missing_body.rfn", 2, "MISSING_BODY"),
        ("ghost_dependency.rfn", 2, "GHOST_DEPENDENCY"),
    ])
    def test_negative_exit_codes(self, file, code, diag):
        got, out = run_cli("check", negative(file))
        assert got == code
        errors = [ln for ln in out.splitlines() if DIAG_LINE.match(ln)]
        assert errors and all(f" {diag}: " in ln for ln in errors if " error " in ln)

    def test_refutation_prints_counterexample(self):
        _, out = run_cli("check", negative("pivot_hi_mutant.rfn"))
        assert "counterexample:" in out and "inputs: a = [" in out

    def test_summary_lines(self):
        _, out = run_cli("check", *corpus("fig1.rfn"))
        assert out.splitlines()[-1] == "B: 5 obligations, 4 Valid, 0 Refuted, 1 InheritedSkipped"

    def test_json_report_schema(self):
        code, out = run_cli("check", "--json", *corpus("fig2.rfn"))
        doc = json.loads(out)
        assert code == 0 and doc["diagnostics"] == []
        assert [m["module"] for m in doc["modules"]] == ["M0", "M1", "M2"]
        for m in doc["modules"]:
            assert set(m) == {"module", "verifies", "counts", "obligations"}
            for o in m["obligations"]:
                assert set(o) == {"kind", "origin", "file", "line", "column", "index", "status", "formula",
                                  "verdict", "counterexample"}

    def test_json_refutation(self):
        code, out = run_cli("check", "--json", negative("pivot_hi_mutant.rfn"))
        doc = json.loads(out)
        assert code == 1 and [d["code"] for d in doc["diagnostics"]] == ["REFUTED"]
        bad = [o for m in doc["modules"] for o in m["obligations"] if o["verdict"] == "Refuted"]
        assert bad[0]["counterexample"]["replayed"] is True

    def test_timing_flag(self):
        _, out = run_cli("check", "--json", "--timing", *corpus("fig1.rfn"))
        assert all(isinstance(m["seconds"], float) for m in json.loads(out)["modules"])

    def test_recheck_inherited_changes_no_verdict(self):
        _, plain = run_cli("check", "--json", *corpus("counter.rfn"))
        _, full = run_cli("check", "--json", "--recheck-inherited", *corpus("counter.rfn"))
        assert json.loads(full)["diagnostics"] == []
        assert all(m["verifies"] for m in json.loads(full)["modules"])

    def test_check_is_deterministic(self):
        assert run_cli("check", negative("pivot_hi_mutant.rfn")) == run_cli("check", negative("pivot_hi_mutant.rfn"))

    def test_residual_nondeterminism_is_not_a_check_error(self):
        assert run_cli("check", negative("residual_nondeterminism.rfn"))[0] == 0


class TestRun:
    def test_driver_output(self):
        assert run_cli("run", *corpus("counter.rfn", "counter_drivers.rfn"), "--entry", "Driver3.Main") == (0, "2\n")

    def test_trace_flag(self):
        _, out = run_cli("run", *corpus("counter.rfn", "counter_drivers.rfn"), "--entry", "Driver3.Main", "--trace")
        assert out.splitlines() == ["trace: M3.Counter.Get: if at line 74: then", "2"]

    def test_arguments(self):
        code, out = run_cli("run", *corpus("fig1.rfn"), "--entry", "B.Max", "--args", "3", "7")
        assert (code, out) == (0, "7\n")

    def test_abstract_module_not_compilable(self):
        code, out = run_cli("run", *corpus("counter.rfn"), "--entry", "M1.Counter.Get")
        assert code == 2 and "ABSTRACT_MODULE_NOT_COMPILABLE" in out

    def test_residual_nondeterminism(self):
        code, out = run_cli("run", negative("residual_nondeterminism.rfn"), "--entry", "Coin.Flip")
        assert code == 2 and "RESIDUAL_NONDETERMINISM" in out

    def test_runtime_trap_exits_one(self, tmp_path):
        src = tmp_path / "d.rfn"
        src.write_text("module A { method F(x: int) returns (y: int) { y := 1 / x; } }")
        code, out = run_cli("run", src, "--entry", "A.F", "--args", "0")
        assert code == 1 and DIAG_LINE.match(out.splitlines()[0]) and "DIVISION_BY_ZERO" in out

    def test_runtime_checks_flag(self, tmp_path):
        src = tmp_path / "a.rfn"
        src.write_text("module A { method F(x: int) returns (y: int) { y := x; assert y > 0; } }")
        assert run_cli("run", src, "--entry", "A.F", "--args", "-1")[0] == 0
        code, out = run_cli("run", src, "--entry", "A.F", "--args", "-1", "--runtime-checks")
        assert code == 1 and "ASSERTION_VIOLATION" in out


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [],
        ["bogus"],
        ["check"],
        ["check", "/nonexistent.rfn"],
        ["check", "--int-range", "-1", "x.rfn"],
        ["expand", *corpus("fig2.rfn")],
        ["expand", *corpus("fig2.rfn"), "-m", "Nope"],
        ["run", *corpus("fig1.rfn"), "--entry", "B"],
        ["run", *corpus("fig1.rfn"), "--entry", "B.Nope"],
        ["run", *corpus("fig1.rfn"), "--entry", "B.Max", "--args", "1"],
        ["run", *corpus("fig1.rfn"), "--entry", "B.Max", "--args", "x", "y"],
        ["vcs", *corpus("fig1.rfn"), "-m", "Nope"],
    ])
    def test_usage_errors_exit_three(self, argv):
        assert run_cli(*argv)[0] == 3

    def test_syntax_error_exits_two(self, tmp_path):
        src = tmp_path / "bad.rfn"
        src.write_text("module A {\n  method F( {\n}")
        code, out = run_cli("check", src)
        assert code == 2 and "SYNTAX_ERROR" in out and ":2:" in out

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "rfn.cli", "vcs", str(ROOT / "corpus" / "fig1.rfn"), "-m", "B"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0 and "Termination New" in proc.stdout


class TestVcs:
    def test_text_listing(self):
        code, out = run_cli("vcs", *corpus("fig1.rfn"), "-m", "B")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 5
        assert lines[2].endswith("B.Max#2 InheritedEnsures Inherited: x <= m && y <= m")

    def test_all_modules_by_default(self):
        _, out = run_cli("vcs", *corpus("fig1.rfn"))
        assert any(" A.Max#0 " in ln for ln in out.splitlines())

"""Refinement merging: directives, skeleton matching, tighten-up, superimposition, legality."""

from __future__ import annotations

import dataclasses

import pytest

from helpers import GOLDEN, codes, corpus, frontend, negative, run_cli
from rfn.merge import classify_directives
from rfn.pipeline import load
from rfn.syntax import ast as A
from rfn.syntax import parse_text, pretty_print
from rfn.syntax.printer import expr_str

GOLDENS = [("fig2.rfn", "M1"), ("fig2.rfn", "M2"), ("counter.rfn", "M1"), ("counter.rfn", "M2"),
           ("counter.rfn", "M3"), ("counter.rfn", "M4")]


def merged(text: str, name: str):
    fe = frontend(text)
    assert codes(fe) == [], fe.diagnostics
    return fe.merged[name]


def method_body(mm, path):
    return mm.member(path).body.stmts


class TestGoldens:
    @pytest.mark.parametrize("file, module", GOLDENS)
    def test_expand_matches_golden(self, file, module, monkeypatch):
        monkeypatch.chdir(GOLDEN.parent.parent / "corpus")
        code, out = run_cli("expand", file, "-m", module)
        assert code == 0
        assert out == (GOLDEN / f"{file.split('.')[0]}_{module}.rfn").read_text()

    @pytest.mark.parametrize("module", ["M1", "M2"])
    def test_fig2_provenance_golden(self, module, monkeypatch):
        monkeypatch.chdir(GOLDEN.parent.parent / "corpus")
        code, out = run_cli("expand", "fig2.rfn", "-m", module, "--provenance")
        assert code == 0 and out == (GOLDEN / f"fig2_{module}.provenance.txt").read_text()

    def test_pivot_provenance_marks(self, monkeypatch):
        monkeypatch.chdir(GOLDEN.parent.parent / "corpus")
        _, out = run_cli("expand", "pivot.rfn", "-m", "PivotMedian", "--provenance")
        assert out == (GOLDEN / "pivot_PivotMedian.provenance.txt").read_text()
        lines = out.splitlines()
        assert any(ln.startswith("~") and "var pivot :=" in ln for ln in lines)
        for p in ("var p0, p1, p2", "if a[p2] < a[p0]", "p0, p2 := p2, p0"):
            assert any(ln.startswith("+") and p in ln for ln in lines), p

    def test_expanded_goldens_reparse(self):
        for file, module in GOLDENS:
            text = (GOLDEN / f"{file.split('.')[0]}_{module}.rfn").read_text()
            assert pretty_print(parse_text(text).modules[0]) == text


class TestDirectives:
    def test_fig0_define_and_extend(self):
        prog = parse_text(open(corpus("fig0.rfn")[0]).read())
        kinds = {d.path: d.kind for d in classify_directives(prog.modules[0], prog.modules[1])}
        assert kinds["T"] == "Define" and kinds["F"] == "Define"
        assert "Extend" in kinds.values() or len(kinds) == 2

    def test_extend_refine_copy(self):
        prog = parse_text("module A { method F() {} method G() {} } "
                          "module B refines A { method F... { ...; } method H() {} }")
        kinds = sorted((d.path, d.kind) for d in classify_directives(prog.modules[0], prog.modules[1]))
        assert kinds == [("F", "Refine"), ("G", "Copy"), ("H", "Extend")]

    def test_refinement_is_a_separate_module(self):
        fe = load(corpus("fig2.rfn"))
        assert pretty_print(fe.merged["M0"].module).startswith("abstract module M0")
        assert fe.merged["M0"].module is not fe.merged["M1"].module


class TestSkeletons:
    def test_empty_refinement_copies_base(self):
        base = "module A { method F(x: int) returns (y: int) ensures y >= x { y := x; if y < 0 { y := 0; } } }"
        mm = merged(base + " module B refines A { }", "B")
        a = parse_text(base).modules[0]
        assert dataclasses.replace(mm.module, name="A", refines=None) == a

    def test_elision_is_implicit_at_block_end(self):
        mm = merged("module A { method F() returns (y: int) { y := 1; y := y + 1; } } "
                    "module B refines A { method F... { var z := 2; } }", "B")
        assert [type(s).__name__ for s in method_body(mm, "F")] == ["VarDecl", "Assign", "Assign"]

    def test_added_ensures_are_conjoined(self):
        mm = merged(open(corpus("fig1.rfn")[0]).read(), "B")
        ens = [expr_str(s.expr) for s in mm.member("Max").specs if isinstance(s, A.Ensures)]
        assert len(ens) == 2

    def test_protected_predicate_strengthens_by_conjunction(self):
        mm = merged(open(corpus("counter.rfn")[0]).read(), "M2")
        body = expr_str(mm.member("Counter.Valid").body)
        assert "this in Repr" in body and "c != d" in body

    def test_superimposed_statement_is_marked(self):
        mm = merged("module A { method F() returns (y: int) { y := 1; } } "
                    "module B refines A { method F... { var t := 3; ...; } }", "B")
        first, second = method_body(mm, "F")
        assert mm.mark(first) == "+" and mm.mark(second) == "="

    def test_tightened_such_that(self):
        mm = merged(open(corpus("pivot.rfn")[0]).read(), "PivotMedian")
        tightened = [s for s in method_body(mm, "ChoosePivot") if mm.mark(s) == "~"]
        assert len(tightened) == 1 and isinstance(tightened[0], A.VarDecl)

    def test_if_star_tightened_to_guard(self):
        mm = merged(open(corpus("fig2.rfn")[0]).read(), "M1")
        s = method_body(mm, "Abs")[0]
        assert isinstance(s, A.If) and mm.mark(s) == "~" and expr_str(s.guard) == "0 <= x"

    def test_assume_to_assert(self):
        mm = merged(open(corpus("fig2.rfn")[0]).read(), "M1")
        assert isinstance(method_body(mm, "Abs")[-1], A.Assert)


class TestLegality:
    @pytest.mark.parametrize("text, code", [
        ("abstract module A { method F(x: int) } module B refines A { method F(x: bool) { } }", "SIGNATURE_MISMATCH"),
        ("abstract module A { method F() } module B refines A { function F(): int { 0 } }", "KIND_MISMATCH"),
        ("abstract module A { method F(x: int) requires x > 0 } module B refines A { method F... requires x > 1 { } }",
         "ILLEGAL_REQUIRES_CHANGE"),
        ("abstract module A { method F(x: int) decreases x } module B refines A { method F... decreases x+1 { } }",
         "ILLEGAL_DECREASES_CHANGE"),
        ("abstract module A { class C { var f: int method F() modifies this } } "
         "module B refines A { class C { method F... modifies {} { } } }", "ILLEGAL_FRAME_CHANGE"),
        ("abstract module A { type T = int } module B refines A { type T = bool }", "TYPE_REDEFINITION"),
        ("module A { function F(): int { 1 } } module B refines A { function F... { 2 } }", "ILLEGAL_BODY_CHANGE"),
        ("module A { method F() returns (y: int) { y := 1; } } module B refines A { method F... { y := 2; ...; } }",
         "NEW_STATE_VIOLATION"),
    ])
    def test_rule_violations(self, text, code):
        assert code in codes(frontend(text))

    @pytest.mark.parametrize("file, code", [
        ("new_state_violation.rfn", "NEW_STATE_VIOLATION"),
        ("illegal_break.rfn", "ILLEGAL_BREAK"),
        ("strengthening_unprotected.rfn", "STRENGTHENING_UNPROTECTED"),
    ])
    def test_negative_files(self, file, code):
        assert codes(load([negative(file)])) == [code]

    def test_superimposed_return_may_set_outputs(self):
        mm = merged(open(corpus("counter.rfn")[0]).read(), "M3")
        assert isinstance(method_body(mm, "Counter.Get")[0], A.If)

    def test_new_fields_may_be_assigned(self):
        assert codes(load(corpus("counter.rfn"))) == []

    def test_break_out_of_superimposed_loop_is_allowed(self):
        text = ("module A { method F() returns (y: int) { y := 1; } } "
                "module B refines A { method F... { var i := 0; while i < 3 decreases 3 - i { if i == 1 { break; } i := i + 1; } ...; } }")
        assert codes(frontend(text)) == []

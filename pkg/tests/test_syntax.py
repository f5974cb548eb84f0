"""Lexer, parser, and printer."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import CORPUS, CORE_FILES, corpus
from rfn.diagnostics import LexError, ParseError
from rfn.syntax import ast as A
from rfn.syntax import parse_expr, parse_files, parse_text, pretty_print, tokenize
from rfn.syntax.lexer import IDENT, INT, KW, SYM
from rfn.syntax.printer import expr_str


class TestLexer:
    def test_kinds_and_positions(self):
        toks = tokenize("module A {\n  var x: int\n}", "f.rfn")
        assert [(t.kind, t.text) for t in toks[:3]] == [(KW, "module"), (IDENT, "A"), (SYM, "{")]
        x = next(t for t in toks if t.text == "x")
        assert (x.loc.file, x.loc.line, x.loc.column) == ("f.rfn", 2, 7)

    def test_longest_symbol_first(self):
        assert [t.text for t in tokenize("a ==> b := c :| d ... !in")] == \
            ["a", "==>", "b", ":=", "c", ":|", "d", "...", "!in"]

    def test_unicode_not_equal_is_normalized(self):
        assert [t.text for t in tokenize("c ≠ d")] == ["c", "!=", "d"]

    def test_comments_are_skipped(self):
        toks = tokenize("x // trailing comment\ny")
        assert [t.text for t in toks] == ["x", "y"]
        assert toks[1].loc.line == 2

    def test_integer_literals(self):
        assert [(t.kind, t.text) for t in tokenize("10 20")] == [(INT, "10"), (INT, "20")]

    def test_illegal_character_is_located(self):
        with pytest.raises(LexError) as e:
            tokenize("x\n  @", "f.rfn")
        assert (e.value.loc.line, e.value.loc.column) == (2, 3)
        assert e.value.code == "LEXICAL_ERROR"


class TestParser:
    def test_refinement_skeleton_shapes(self):
        prog = parse_text((CORPUS / "fig2.rfn").read_text(), "fig2.rfn")
        m1 = prog.modules[1]
        assert (m1.name, m1.is_abstract, m1.refines) == ("M1", True, "M0")
        abs_ = m1.decls[0]
        assert abs_.sig_elided
        assert isinstance(abs_.body.stmts[0], A.If)
        assert isinstance(abs_.body.stmts[0].then.stmts[0], A.Elision)

    def test_assert_with_elided_condition(self):
        prog = parse_text((CORPUS / "fig2.rfn").read_text())
        last = prog.modules[1].decls[0].body.stmts[-1]
        assert isinstance(last, A.Assert) and isinstance(last.cond, A.Elided)

    def test_decreases_tuple_with_boolean_component(self):
        prog = parse_text((CORPUS / "fig1.rfn").read_text())
        d = A.decreases_of(prog.modules[1].decls[0])
        assert not d.star and [expr_str(e) for e in d.exprs] == ["x < y", "x - y"]

    def test_decreases_star(self):
        prog = parse_text((CORPUS / "fig1.rfn").read_text())
        assert A.decreases_of(prog.modules[0].decls[0]).star

    def test_chained_comparison(self):
        e = parse_expr("lo <= r < hi")
        assert isinstance(e, A.Chain) and e.ops == ("<=", "<")

    def test_implication_is_right_associative_and_loosest(self):
        e = parse_expr("a && b ==> c ==> d")
        assert e.op == "==>" and e.left.op == "&&" and e.right.op == "==>"

    def test_assume_marked_such_that(self):
        prog = parse_text((CORPUS / "counter.rfn").read_text())
        get = prog.modules[2].decls[0].members[-1]
        s = get.body.stmts[0]
        assert isinstance(s, A.AssignSuchThat) and s.assume

    def test_import_forms(self):
        prog = parse_text("module X { import A  import B = C  import D as E  import F as G default H }")
        imps = [d for d in prog.modules[0].decls if isinstance(d, A.ImportDecl)]
        assert [(i.name, i.mode, i.target, i.default) for i in imps] == [
            ("A", "eq", "A", None), ("B", "eq", "C", None), ("D", "as", "E", None), ("F", "default", "G", "H")]

    def test_syntax_error_is_located(self):
        with pytest.raises(ParseError) as e:
            parse_text("module A {\n  method F( {\n}", "bad.rfn")
        assert e.value.code == "SYNTAX_ERROR" and e.value.loc.line == 2

    def test_modify_with_and_without_body(self):
        prog = parse_text((CORPUS / "counter.rfn").read_text())
        inc1 = prog.modules[2].decls[0].members[-2]
        inc2 = prog.modules[3].decls[1].members[-2]
        m1 = inc1.body.stmts[1]
        assert isinstance(m1, A.Modify) and m1.body is None
        assert isinstance(inc2.body.stmts[1], A.Modify) and isinstance(inc2.body.stmts[1].frame, A.Elided)


class TestPrinter:
    @pytest.mark.parametrize("name", CORE_FILES + ["imports.rfn", "pivot.rfn", "counter_drivers.rfn"])
    def test_corpus_round_trips(self, name):
        prog = parse_files(corpus(name))
        for m in prog.modules:
            text = pretty_print(m)
            again = parse_text(text).modules[0]
            assert again == m
            assert pretty_print(again) == text

    def test_empty_module(self):
        assert pretty_print(parse_text("module A {}").modules[0]) == "module A {\n}\n"

    def test_precedence_parentheses(self):
        assert expr_str(parse_expr("(a + b) * c")) == "(a + b) * c"
        assert expr_str(parse_expr("a + b * c")) == "a + b * c"
        assert expr_str(parse_expr("(a ==> b) ==> c")) == "(a ==> b) ==> c"


# ---------------------------------------------------------------- property: print/parse round trip

names = st.sampled_from(["a", "b", "x", "y", "lo", "hi"])
atoms = st.one_of(
    st.integers(min_value=0, max_value=50).map(A.IntLit),
    names.map(A.Name),
)


def arith(children):
    return st.one_of(
        st.builds(A.Binary, st.sampled_from(["+", "-", "*", "/", "%"]), children, children),
        st.builds(A.Unary, st.just("-"), children),
        st.builds(lambda s: A.Length(A.Name(s)), names),
        st.builds(lambda s, i: A.Index(A.Name(s), i), names, children),
    )


int_exprs = st.recursive(atoms, arith, max_leaves=8)
comparisons = st.builds(A.Binary, st.sampled_from(["==", "!=", "<", "<=", ">", ">="]), int_exprs, int_exprs)
bool_atoms = st.one_of(st.booleans().map(A.BoolLit), comparisons, names.map(A.Name))


def logic(children):
    return st.one_of(
        st.builds(A.Binary, st.sampled_from(["&&", "||", "==>"]), children, children),
        st.builds(A.Unary, st.just("!"), children),
        st.builds(A.Ite, children, children, children),
    )


bool_exprs = st.recursive(bool_atoms, logic, max_leaves=8)


@settings(max_examples=300, deadline=None)
@given(st.one_of(int_exprs, bool_exprs))
def test_expression_round_trip(e):
    assert parse_expr(expr_str(e)) == e

"""Obligation generation and classification, and the bounded checker."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import GOLDEN, codes, corpus, frontend, negative
from rfn.pipeline import load
from rfn.verify.checker import INHERITED_SKIPPED, REFUTED, VALID, check_module, obligation_json
from rfn.verify.engine import Bounds
from rfn.verify.obligations import generate_obligations


def report(fe, module, bounds=Bounds(), recheck=False):
    assert codes(fe) == [], fe.diagnostics
    return check_module(fe.env(), fe.merged[module], bounds, recheck)


def verdicts(text, module, bounds=Bounds(), recheck=False) -> dict:
    rep = report(frontend(text), module, bounds, recheck)
    return {(o.kind, o.index): v.status for o, v in rep.results}


def obligations(fe, module) -> list:
    return generate_obligations(fe.merged[module], fe.env())


def method(body, sig="F(x: int) returns (y: int)", specs=""):
    return f"module T {{ method {sig} {specs} {{ {body} }} }}"


class TestObligations:
    def test_fig1_b_classification(self):
        obs = obligations(load(corpus("fig1.rfn")), "B")
        by = {(o.origin, o.kind): o.status for o in obs}
        assert by[("B.Max", "InheritedEnsures")] == "Inherited"
        assert by[("B.Max", "NewEnsures")] == "New"
        assert [o.status for o in obs if o.kind == "Termination"] == ["New", "New"]

    def test_fig1_b_golden_json(self):
        fe = load(corpus("fig1.rfn"))
        got = [obligation_json(o) for o in obligations(fe, "B")]
        for g in got:
            g["file"] = g["file"].rsplit("/", 1)[-1]
        assert got == json.loads((GOLDEN / "fig1_B_vcs.json").read_text())

    def test_no_termination_for_decreases_star(self):
        obs = obligations(load(corpus("fig1.rfn")), "A")
        assert [o.kind for o in obs] == ["NewEnsures"]

    def test_assume_to_assert_is_new_and_becomes_inherited(self):
        fe = load(corpus("fig2.rfn"))
        m1 = {o.kind: o.status for o in obligations(fe, "M1")}
        assert m1["AssumeToAssert"] == "New"
        m2 = [(o.kind, o.status) for o in obligations(fe, "M2")]
        assert ("Assert", "Inherited") in m2 and ("AssumeToAssert", "New") in m2
        assert ("LoopInvInit", "New") in m2 and ("LoopInvMaintain", "New") in m2

    def test_tighten_up_obligation_names_base_condition(self):
        obs = obligations(load(corpus("pivot.rfn")), "PivotMedian")
        t = [o for o in obs if o.kind == "TightenUp"]
        assert len(t) == 1 and t[0].formula_text().startswith("lo <= (if a[p1] < a[p0]")

    def test_strengthened_predicate_makes_dependent_ensures_new(self):
        obs = obligations(load(corpus("counter.rfn")), "M2")
        inc = {o.formula_text(): o.status for o in obs if o.origin == "M2.Counter.Inc" and o.kind == "InheritedEnsures"}
        assert inc["Valid() && fresh(Repr - old(Repr))"] == "New"
        assert inc["N == old(N) + 1"] == "Inherited"

    def test_indices_are_per_member_and_dense(self):
        obs = obligations(load(corpus("counter.rfn")), "M2")
        per = {}
        for o in obs:
            per.setdefault(o.origin, []).append(o.index)
        assert all(ix == list(range(len(ix))) for ix in per.values())

    def test_generation_is_deterministic(self):
        a = [obligation_json(o) for o in obligations(load(corpus("counter.rfn")), "M3")]
        b = [obligation_json(o) for o in obligations(load(corpus("counter.rfn")), "M3")]
        assert a == b


class TestCorpusVerdicts:
    @pytest.mark.parametrize("files", [["fig0.rfn"], ["fig1.rfn"], ["fig2.rfn"], ["fig3_4.rfn"], ["imports.rfn"],
                                       ["pivot.rfn"], ["counter.rfn", "counter_drivers.rfn"]])
    def test_corpus_verifies(self, files):
        fe = load(corpus(*files))
        for name in fe.order:
            rep = report(fe, name)
            assert rep.verifies, [(o.origin, o.kind, v.message) for o, v in rep.results if v.status == REFUTED]
            assert not rep.warnings

    def test_fig2_staging(self):
        fe = load(corpus("fig2.rfn"))
        m2 = {o.kind: v.status for o, v in report(fe, "M2").results if o.status == "New"}
        assert m2 == {"LoopInvInit": VALID, "LoopInvMaintain": VALID, "AssumeToAssert": VALID}
        bad = load([negative("fig2_first_assume_asserted.rfn")])
        rep = report(bad, "M1")
        (ob, v), = [(o, v) for o, v in rep.results if v.status == REFUTED]
        assert ob.kind == "AssumeToAssert"
        assert int(v.counterexample.inputs["x"]) < 0

    def test_inherited_obligations_are_skipped(self):
        rep = report(load(corpus("fig1.rfn")), "B")
        assert rep.counts() == {VALID: 4, REFUTED: 0, INHERITED_SKIPPED: 1}

    def test_deleted_decreases_is_divergence_call(self):
        rep = report(load([negative("divergence_call.rfn")]), "B")
        diags = rep.diagnostics()
        assert [d.code for d in diags] == ["DIVERGENCE_CALL"]


class TestPivot:
    def test_median_of_three_tightens(self):
        rep = report(load(corpus("pivot.rfn")), "PivotMedian")
        t = [v.status for o, v in rep.results if o.kind == "TightenUp"]
        assert t == [VALID]

    def test_hi_mutant_has_concrete_counterexample(self):
        rep = report(load([negative("pivot_hi_mutant.rfn")]), "PivotMedian")
        (ob, v), = [(o, v) for o, v in rep.results if v.status == REFUTED]
        assert ob.kind == "TightenUp"
        cex = v.counterexample
        assert cex.replayed
        a = json.loads(cex.inputs["a"])
        lo, hi = int(cex.inputs["lo"]), int(cex.inputs["hi"])
        p0, p1, p2 = lo, (lo + hi) // 2, hi - 1
        if a[p2] < a[p0]:
            p0, p2 = p2, p0
        pivot = p0 if a[p1] < a[p0] else hi if a[p2] < a[p1] else p1
        assert 0 <= lo < hi <= len(a) and not (lo <= pivot < hi)


class TestChecker:
    @pytest.mark.parametrize("text, kind", [
        (method("y := x;", specs="ensures y > x"), "NewEnsures"),
        (method("y := 10 / x;"), "WellFormed"),
        (method("assert x != 2; y := x;"), "Assert"),
        (method("y := 0; while y < x invariant y <= x decreases x - y { y := y + 2; }", specs="requires 0 <= x"),
         "LoopInvMaintain"),
        (method("y := 0; while y < x invariant y <= x + 1 decreases y { y := y + 1; }", specs="requires 0 <= x"),
         "Termination"),
        (method("y := 5; while y < x invariant y <= x { y := y + 1; }"), "LoopInvInit"),
        (method("y :| y > x && y < x + 2;", specs="ensures y == x + 2"), "NewEnsures"),
        (method("y :| y > x && y < x;"), "SuchThatFeasible"),
    ])
    def test_refuted(self, text, kind):
        v = verdicts(text, "T")
        refuted = sorted(k for (k, _), s in v.items() if s == REFUTED)
        assert refuted == [kind], v

    @pytest.mark.parametrize("text", [
        method("y := x;", specs="ensures y == x"),
        method("if x < 0 { y := -x; } else { y := x; }", specs="ensures 0 <= y"),
        method("y := 0; while y < x invariant y <= x decreases x - y { y := y + 1; }",
               specs="requires 0 <= x ensures y == x"),
        method("y :| y == x + 1;", specs="ensures y > x"),
        method("y := 10 / x;", specs="requires x != 0"),
    ])
    def test_valid(self, text):
        v = verdicts(text, "T")
        assert set(v.values()) == {VALID}, v

    def test_call_precondition(self):
        text = ("module T { method G(x: int) returns (y: int) requires 0 < x { y := x; } "
                "method F() returns (z: int) { z := G(0); } }")
        v = verdicts(text, "T")
        assert v[("CallPre", 0)] == REFUTED

    def test_call_uses_callee_summary(self):
        text = ("module T { method G(x: int) returns (y: int) ensures y > x { y := x + 1; } "
                "method F() returns (z: int) ensures z > 0 { z := G(0); } }")
        assert set(verdicts(text, "T").values()) == {VALID}

    def test_demonic_choice_must_satisfy_every_resolution(self):
        text = method("if * { y := x; } else { y := -x; }", specs="ensures y == x")
        assert REFUTED in verdicts(text, "T").values()

    def test_null_dereference_and_frames(self):
        text = ("module T { class C { var f: int "
                "method Set(o: C) modifies this { o.f := 1; } } }")
        v = verdicts(text, "T")
        statuses = {k: s for (k, _), s in v.items()}
        assert statuses["WellFormed"] == REFUTED and statuses["FrameMethod"] == REFUTED

    def test_bounds_exhausted_warning(self):
        fe = load(corpus("pivot.rfn"))
        rep = check_module(fe.env(), fe.merged["PivotMedian"], Bounds(max_runs=5))
        assert [w.code for w in rep.warnings] == ["BOUNDS_EXHAUSTED"]

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            Bounds(int_low=1, int_high=3)

    def test_checking_is_deterministic(self):
        def run():
            rep = report(load([negative("pivot_hi_mutant.rfn")]), "PivotMedian")
            return [(o.kind, v.status, v.counterexample.render() if v.counterexample else None) for o, v in rep.results]
        assert run() == run()


# ---------------------------------------------------------------- properties

@settings(max_examples=40, deadline=None)
@given(lo=st.integers(-5, 5), c=st.integers(-8, 8))
def test_refutation_matches_exact_oracle(lo, c):
    # y := x under x >= lo can reach c iff c >= lo; literals keep c and lo inside the window
    text = method("y := x;", specs=f"requires {lo} <= x ensures y != {c}")
    v = verdicts(text, "T")[("NewEnsures", 0)]
    assert (v == REFUTED) == (c >= lo)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(0, 6), r=st.integers(0, 3))
def test_wider_bounds_never_lose_a_refutation(k, r):
    text = method("y := x * x;", specs=f"ensures y != {k}")
    small = verdicts(text, "T", Bounds(int_low=-r, int_high=r))
    large = verdicts(text, "T", Bounds(int_low=-r - 2, int_high=r + 2))
    if small[("NewEnsures", 0)] == REFUTED:
        assert large[("NewEnsures", 0)] == REFUTED

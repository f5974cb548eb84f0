"""SMT-LIB emission."""

from __future__ import annotations

import pytest

from helpers import corpus, run_cli
from rfn.pipeline import load
from rfn.verify.engine import Bounds
from rfn.verify.obligations import generate_obligations
from rfn.verify.smtlib import emit_smtlib


def scripts(paths, module, **kw):
    fe = load(paths)
    env = fe.env()
    mm = fe.merged[module]
    return emit_smtlib(env, mm, generate_obligations(mm, env), **kw)


def test_script_shape():
    s = next(x for x in scripts(corpus("pivot.rfn"), "PivotMedian") if x.obligation.kind == "TightenUp")
    assert s.unsupported is None
    lines = s.text.splitlines()
    assert lines[0].startswith("; obligation 6 of PivotMedian.ChoosePivot: TightenUp")
    assert "(set-logic ALL)" in lines and lines[-2:] == ["(check-sat)", "(exit)"]
    assert s.name == "PivotMedian.ChoosePivot.6.smt2"


def test_inherited_obligations_are_not_emitted_by_default():
    names = {s.obligation.kind for s in scripts(corpus("fig1.rfn"), "B")}
    assert "InheritedEnsures" not in names
    both = {s.obligation.kind for s in scripts(corpus("fig1.rfn"), "B", include_inherited=True)}
    assert "InheritedEnsures" in both


def test_unbounded_drops_window_constraints():
    bounded = next(s for s in scripts(corpus("fig2.rfn"), "M2") if s.obligation.kind == "LoopInvMaintain")
    free = next(s for s in scripts(corpus("fig2.rfn"), "M2", bounded=False) if s.obligation.kind == "LoopInvMaintain")
    assert "(<= x 3)" in bounded.text and "(<= x 3)" not in free.text


def test_window_follows_bounds():
    s = next(s for s in scripts(corpus("fig2.rfn"), "M2", bounds=Bounds(int_low=-5, int_high=5))
             if s.obligation.kind == "LoopInvMaintain")
    assert "(<= x 5)" in s.text


def test_heap_obligations_are_reported_unsupported():
    unsupported = [s for s in scripts(corpus("counter.rfn"), "M2") if s.unsupported]
    assert unsupported and all(not s.text for s in unsupported)


def test_cli_writes_files_and_lists_skips(tmp_path):
    code, out = run_cli("vcs", *corpus("counter.rfn"), "-m", "M2", "--smt", tmp_path)
    assert code == 0
    written = sorted(p.name for p in tmp_path.iterdir())
    skipped = [ln for ln in out.splitlines() if ln.startswith("skipped ")]
    assert skipped and all("unsupported construct" in ln for ln in skipped)
    assert all(p.endswith(".smt2") for p in written)


def test_solver_agrees_with_bounded_checker():
    pytest.importorskip("z3")
    from smt_agreement import agreement_rows, agrees

    rows = list(agreement_rows())
    assert len(rows) >= 30
    assert [r for r in rows if not agrees(r[1], r[2])] == []
    assert any(status == "Refuted" for _l, status, _a in rows)

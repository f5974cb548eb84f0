"""Refinement-level properties: inherited verdicts are stable and refinement preserves correctness."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import ALL_POSITIVE, corpus, frontend
from rfn.pipeline import load
from rfn.verify.checker import INHERITED_SKIPPED, REFUTED, VALID, check_module


def sweep(fe):
    """(module, obligation label, skipped verdict, rechecked verdict) for every obligation."""
    env = fe.env()
    for name in fe.order:
        plain = check_module(env, fe.merged[name])
        full = check_module(env, fe.merged[name], recheck_inherited=True)
        for (o, v), (o2, v2) in zip(plain.results, full.results):
            assert (o.kind, o.index, o.origin) == (o2.kind, o2.index, o2.origin)
            yield name, o, v.status, v2.status


@pytest.mark.parametrize("files", ALL_POSITIVE)
def test_recheck_inherited_changes_no_verdict(files):
    for _name, ob, plain, full in sweep(load(corpus(*files))):
        if ob.status == "Inherited":
            assert plain == INHERITED_SKIPPED and full == VALID, ob.formula_text()
        else:
            assert plain == full


BASE = """
abstract module Base {{
  method Pick(lo: int, hi: int) returns (r: int)
    requires lo <= hi
    ensures lo <= r <= hi
  {{
    r :| lo <= r <= hi;
  }}
}}
module Impl refines Base {{
  method Pick... {{
    r := {choice};
  }}
}}
module Client {{
  import B = Impl
  method Use() returns (v: int)
    ensures 0 <= v <= 2
  {{
    v := B.Pick(0, 2);
  }}
}}
"""

CHOICES = ["lo", "hi", "(lo + hi) / 2", "lo + 1", "hi - 1", "hi + 1", "lo - 1", "0", "lo * 2 - hi"]


@settings(max_examples=len(CHOICES) * 2, deadline=None)
@given(st.sampled_from(CHOICES))
def test_valid_tighten_up_keeps_inherited_and_client_obligations_valid(choice):
    fe = frontend(BASE.format(choice=choice))
    env = fe.env()
    impl = check_module(env, fe.merged["Impl"], recheck_inherited=True)
    tighten = [v.status for o, v in impl.results if o.kind == "TightenUp"]
    inherited = [v.status for o, v in impl.results if o.status == "Inherited"]
    oracle = all(lo <= eval(choice.replace("/", "//"), {"lo": lo, "hi": hi}) <= hi
                 for lo in range(-4, 5) for hi in range(lo, 5))
    assert tighten == [VALID if oracle else REFUTED]
    if oracle:
        # semantic refinement: once the new obligations hold, inherited ones and clients need no new proof
        assert set(inherited) == {VALID}
        client = check_module(env, fe.merged["Client"])
        assert all(v.status == VALID for _o, v in client.results)

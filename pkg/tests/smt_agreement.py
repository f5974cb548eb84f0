"""Run emitted SMT-LIB scripts through z3 and compare with the bounded checker."""

from __future__ import annotations

from helpers import ALL_POSITIVE, corpus, negative
from rfn.pipeline import load
from rfn.verify.checker import REFUTED, VALID, check_module
from rfn.verify.smtlib import emit_smtlib

NEGATIVE_REFUTED = ["fig2_first_assume_asserted.rfn", "pivot_hi_mutant.rfn", "divergence_call.rfn"]


def solve(text: str) -> str:
    import z3

    s = z3.Solver()
    s.set("timeout", 20_000)
    s.from_string(text)
    return str(s.check())


def agreement_rows():
    """Yield (label, bounded verdict, smt answer) for every supported obligation in the corpus."""
    programs = [corpus(*f) for f in ALL_POSITIVE] + [[negative(n)] for n in NEGATIVE_REFUTED]
    for paths in programs:
        fe = load(paths)
        env = fe.env()
        for name in fe.order:
            mm = fe.merged[name]
            rep = check_module(env, mm)
            verdict = {id(o): v.status for o, v in rep.results}
            for script in emit_smtlib(env, mm, [o for o, _ in rep.results]):
                if script.unsupported:
                    continue
                status = verdict[id(script.obligation)]
                if status not in (VALID, REFUTED):
                    continue
                yield f"{name}.{script.name}", status, solve(script.text)


def agrees(status: str, answer: str) -> bool:
    return (status, answer) in ((VALID, "unsat"), (REFUTED, "sat"))

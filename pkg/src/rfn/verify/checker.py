"""Per-module checking: generate, classify, and decide obligations within bounds."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from ..diagnostics import ERROR, WARNING, Diagnostic
from ..env import ProgramEnv
from ..merge import MergedModule
from .engine import Bounds, Counterexample, MemberCheck
from .obligations import INHERITED_STATUS, CallGraph, Obligation, generate_obligations, measure

VALID = "Valid"
REFUTED = "Refuted"
INHERITED_SKIPPED = "InheritedSkipped"

DIAGNOSTIC_CODE = {"DivergenceCall": "DIVERGENCE_CALL"}


@dataclass
class Verdict:
    status: str
    counterexample: Optional[Counterexample] = None
    message: str = ""

    def to_json(self):
        out = {"status": self.status}
        if self.message:
            out["message"] = self.message
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_json()
        return out


@dataclass
class ModuleReport:
    module: str
    results: list = field(default_factory=list)  # [(Obligation, Verdict)]
    warnings: list = field(default_factory=list)  # Diagnostics
    seconds: float = 0.0
    runs: int = 0

    @property
    def verifies(self) -> bool:
        return not any(v.status == REFUTED for _o, v in self.results)

    def counts(self) -> dict:
        out = {VALID: 0, REFUTED: 0, INHERITED_SKIPPED: 0}
        for _o, v in self.results:
            out[v.status] += 1
        return out

    def diagnostics(self) -> list:
        out = list(self.warnings)
        for ob, v in self.results:
            if v.status != REFUTED:
                continue
            code = DIAGNOSTIC_CODE.get(ob.kind, "REFUTED")
            msg = f"{ob.kind} obligation of {ob.origin} refuted: {v.message}"
            cex = v.counterexample.render() if v.counterexample is not None else None
            out.append(Diagnostic(ERROR, code, msg, ob.loc, cex))
        return out


def check_module(env: ProgramEnv, mm: MergedModule, bounds: Bounds = Bounds(),
                 recheck_inherited: bool = False, graph: Optional[CallGraph] = None,
                 obligations: Optional[list] = None) -> ModuleReport:
    start = time.perf_counter()
    graph = graph or CallGraph(env).build([mm.name])
    obs = obligations if obligations is not None else generate_obligations(mm, env, graph)
    report = ModuleReport(mm.name)
    verdicts: dict = {}
    by_member: dict = {}
    for ob in obs:
        if ob.status == INHERITED_STATUS and not recheck_inherited:
            verdicts[id(ob)] = Verdict(INHERITED_SKIPPED)
        elif ob.static_verdict is not None:
            ok = ob.static_verdict == VALID
            verdicts[id(ob)] = Verdict(VALID if ok else REFUTED, None, "" if ok else ob.static_message)
        else:
            by_member.setdefault(ob.member, []).append(ob)
    mod = env.module(mm.name)
    for path, decl, cls_decl in mm.members():
        todo = by_member.get(path)
        if not todo:
            continue
        cls = mod.classes.get(cls_decl.name) if cls_decl is not None else None
        member_obs = [o for o in obs if o.member == path]
        mexprs = measure(decl, graph.recursive((mm.name, path)))
        mc = MemberCheck(env, mm, path, decl, cls, member_obs, {o.key for o in todo}, bounds, mexprs)
        res = mc.explore()
        report.runs += res.runs
        for ob in todo:
            cex = res.failures.get(ob.key)
            if cex is None:
                verdicts[id(ob)] = Verdict(VALID)
            else:
                verdicts[id(ob)] = Verdict(REFUTED, cex, cex.message)
        if res.exhausted:
            report.warnings.append(Diagnostic(
                WARNING, "BOUNDS_EXHAUSTED",
                f"exploration of {mm.name}.{path} stopped after {res.runs} runs; Valid verdicts are partial",
                decl.loc))
    report.results = [(ob, verdicts[id(ob)]) for ob in obs]
    report.seconds = time.perf_counter() - start
    return report


def obligation_json(ob: Obligation, verdict: Optional[Verdict] = None) -> dict:
    out = {
        "kind": ob.kind,
        "origin": ob.origin,
        "file": ob.loc.file,
        "line": ob.loc.line,
        "column": ob.loc.column,
        "index": ob.index,
        "status": ob.status,
        "formula": ob.formula_text(),
    }
    if verdict is not None:
        out["verdict"] = verdict.status
        out["counterexample"] = verdict.counterexample.to_json() if verdict.counterexample else None
    return out

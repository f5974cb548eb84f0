"""Front end shared by the CLI and tests: parse, build the graph, merge, and run static checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import merge as M
from .diagnostics import Diagnostic, RefineError
from .env import ProgramEnv
from .resolve import ModuleGraph, build_graph, check_abstract_rules, check_names
from .syntax import ast as A
from .syntax.parser import parse_files, parse_text


@dataclass
class Frontend:
    program: Optional[A.SourceProgram] = None
    graph: Optional[ModuleGraph] = None
    merged: dict = field(default_factory=dict)  # name -> MergedModule
    order: list = field(default_factory=list)  # bases before refinements, imports before importers
    diagnostics: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)

    def env(self, mode: str = "verify") -> ProgramEnv:
        return ProgramEnv(self.merged, mode)

    def chain(self, name: str) -> list:
        """Refinement chain ending at `name`, root first."""
        out = []
        cur = name
        while cur is not None:
            out.append(cur)
            cur = self.graph.base_of(cur) if self.graph else None
        return list(reversed(out))


def load(paths=None, text: Optional[str] = None, filename: str = "<input>") -> Frontend:
    fe = Frontend()
    try:
        fe.program = parse_text(text, filename) if text is not None else parse_files(paths)
    except RefineError as e:
        fe.diagnostics.append(e.diagnostic())
        return fe
    return analyze(fe.program, fe)


def analyze(program: A.SourceProgram, fe: Optional[Frontend] = None) -> Frontend:
    fe = fe or Frontend(program=program)
    fe.program = program
    graph, diags = build_graph(program)
    fe.graph = graph
    fe.diagnostics.extend(diags)
    if diags:
        return fe
    decls = {m.name: m for m in program.modules}
    fe.order = graph.topological_order()
    failed = set()
    for name in fe.order:
        m = decls[name]
        if m.refines is None:
            fe.merged[name] = M.MergedModule.root(m)
            continue
        if m.refines in failed or m.refines not in fe.merged:
            failed.add(name)
            continue
        mm, mdiags = M.merge_module(fe.merged[m.refines], m, graph, lambda n: fe.merged[n].module)
        fe.diagnostics.extend(mdiags)
        if any(d.severity == "error" for d in mdiags):
            failed.add(name)
        fe.merged[name] = mm
    if not fe.ok:
        return fe
    fe.diagnostics.extend(check_abstract_rules({n: mm.module for n, mm in fe.merged.items()}, graph))
    env = fe.env()
    for name in fe.order:
        fe.diagnostics.extend(check_names(env, name))
    return fe


def sorted_diagnostics(diags) -> list:
    return sorted(diags, key=Diagnostic.sort_key)

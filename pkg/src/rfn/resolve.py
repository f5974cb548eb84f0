"""Module graph, structural module rules, import adherence, and name checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .diagnostics import ERROR, WARNING, Diagnostic, RefineError
from .syntax import ast as A

CYCLIC_IMPORT = "CYCLIC_IMPORT"
CYCLIC_REFINEMENT = "CYCLIC_REFINEMENT"
UNKNOWN_MODULE = "UNKNOWN_MODULE"
DUPLICATE_MODULE = "DUPLICATE_MODULE"
DUPLICATE_DECL = "DUPLICATE_DECL"
ABSTRACT_IMPORT_VIOLATION = "ABSTRACT_IMPORT_VIOLATION"
MISSING_BODY = "MISSING_BODY"
ADHERENCE_FAILURE = "ADHERENCE_FAILURE"
ILLEGAL_IMPORT_CHANGE = "ILLEGAL_IMPORT_CHANGE"
UNRESOLVED_NAME = "UNRESOLVED_NAME"


@dataclass(frozen=True)
class ImportBinding:
    local_name: str
    mode: str  # "eq" | "as" | "default"
    target: str
    default: Optional[str] = None

    def __post_init__(self):
        if (self.default is not None) != (self.mode == "default"):
            raise ValueError("a default target is present exactly for `as ... default` imports")

    @staticmethod
    def of(decl: A.ImportDecl) -> "ImportBinding":
        return ImportBinding(decl.name, decl.mode, decl.target, decl.default)

    def verifier_target(self) -> str:
        return self.target

    def compiler_target(self) -> str:
        return self.default if self.mode == "default" else self.target


@dataclass
class ModuleGraph:
    nodes: list  # module names in source order
    import_edges: list = field(default_factory=list)  # (from, ImportBinding)
    refines_edges: list = field(default_factory=list)  # (refining, base)

    def base_of(self, name: str) -> Optional[str]:
        for r, b in self.refines_edges:
            if r == name:
                return b
        return None

    def refines_transitively(self, candidate: str, target: str) -> bool:
        seen = set()
        cur: Optional[str] = candidate
        while cur is not None and cur not in seen:
            if cur == target:
                return True
            seen.add(cur)
            cur = self.base_of(cur)
        return False

    def dependencies(self, name: str) -> list:
        deps = []
        b = self.base_of(name)
        if b is not None:
            deps.append(b)
        for frm, binding in self.import_edges:
            if frm == name:
                deps.append(binding.target)
                if binding.default:
                    deps.append(binding.default)
        return deps

    def topological_order(self) -> list:
        """Dependencies first; ties broken by source order."""
        order, state = [], {}

        def visit(n):
            if state.get(n) == 2:
                return
            state[n] = 1
            for d in self.dependencies(n):
                if d in self.nodes and state.get(d) != 1:
                    visit(d)
            state[n] = 2
            order.append(n)

        for n in self.nodes:
            visit(n)
        return order


def _find_cycle(nodes, succ) -> Optional[list]:
    color = {n: 0 for n in nodes}
    stack: list = []

    def dfs(n):
        color[n] = 1
        stack.append(n)
        for m in succ(n):
            if m not in color:
                continue
            if color[m] == 1:
                return stack[stack.index(m):] + [m]
            if color[m] == 0:
                found = dfs(m)
                if found:
                    return found
        stack.pop()
        color[n] = 2
        return None

    for n in nodes:
        if color[n] == 0:
            found = dfs(n)
            if found:
                return found
    return None


def build_graph(program: A.SourceProgram):
    """Return (ModuleGraph, diagnostics)."""
    diags = []
    seen = {}
    nodes = []
    for m in program.modules:
        if m.name in seen:
            diags.append(Diagnostic(ERROR, DUPLICATE_MODULE, f"module {m.name} is declared twice", m.loc))
            continue
        seen[m.name] = m
        nodes.append(m.name)
    graph = ModuleGraph(nodes)
    for m in program.modules:
        if seen.get(m.name) is not m:
            continue
        names = {}
        for d in m.decls:
            key = A.member_key(d)
            if key in names:
                diags.append(Diagnostic(ERROR, DUPLICATE_DECL, f"{key} is declared twice in module {m.name}", d.loc))
            names[key] = d
        if m.refines is not None:
            if m.refines not in seen:
                diags.append(Diagnostic(ERROR, UNKNOWN_MODULE, f"module {m.name} refines unknown module {m.refines}", m.loc))
            else:
                graph.refines_edges.append((m.name, m.refines))
        for d in m.decls:
            if isinstance(d, A.ImportDecl):
                binding = ImportBinding.of(d)
                missing = [t for t in (binding.target, binding.default) if t is not None and t not in seen]
                if missing:
                    diags.append(Diagnostic(ERROR, UNKNOWN_MODULE, f"import of unknown module {missing[0]}", d.loc))
                    continue
                graph.import_edges.append((m.name, binding))
    if diags:
        return graph, diags

    def import_succ(n):
        out = []
        for frm, b in graph.import_edges:
            if frm == n:
                out.append(b.target)
                if b.default:
                    out.append(b.default)
        return out

    # imports are inherited by refining modules, so a refinement edge carries
    # its base's imports along; a cycle through any import is an import cycle
    cyc = _find_cycle(nodes, lambda n: import_succ(n) + ([graph.base_of(n)] if graph.base_of(n) else []))
    if cyc:
        only_refines = _find_cycle(nodes, lambda n: [graph.base_of(n)] if graph.base_of(n) else [])
        loc = seen[cyc[0]].loc
        if only_refines:
            diags.append(Diagnostic(ERROR, CYCLIC_REFINEMENT,
                                    "refinement cycle: " + " -> ".join(only_refines), seen[only_refines[0]].loc))
        else:
            diags.append(Diagnostic(ERROR, CYCLIC_IMPORT, "import cycle: " + " -> ".join(cyc), loc))
    return graph, diags


# ------------------------------------------------------------------ abstract rules


def effective_imports(module: A.ModuleDecl) -> dict:
    return {d.name: ImportBinding.of(d) for d in module.decls if isinstance(d, A.ImportDecl)}


def _missing_bodies(decls, prefix=""):
    for d in decls:
        if isinstance(d, A.TypeDecl) and d.form == "opaque":
            yield d, f"type {prefix}{d.name} has no definition"
        elif isinstance(d, A.FunctionDecl) and d.body is None:
            yield d, f"{'predicate' if d.is_predicate else 'function'} {prefix}{d.name} has no body"
        elif isinstance(d, A.MethodDecl) and d.body is None and d.form != "lemma":
            label = d.name or "constructor"
            yield d, f"{d.form} {prefix}{label} has no body"
        elif isinstance(d, A.ClassDecl):
            yield from _missing_bodies(d.members, prefix + d.name + ".")


def check_abstract_rules(merged: dict, graph: ModuleGraph) -> list:
    """`merged` maps module name -> fully merged ModuleDecl."""
    diags = []
    for name in graph.nodes:
        m = merged.get(name)
        if m is None:
            continue
        for d in m.decls:
            if isinstance(d, A.ImportDecl) and d.mode == "default" and d.default in merged and d.target in merged:
                diags.extend(check_adherence(d.default, d.target, graph, merged.__getitem__, d.loc)[1])
        if m.is_abstract:
            continue
        for d, msg in _missing_bodies(m.decls):
            diags.append(Diagnostic(ERROR, MISSING_BODY, f"non-abstract module {name}: {msg}", d.loc))
        for d in m.decls:
            if not isinstance(d, A.ImportDecl):
                continue
            compiled = d.default if d.mode == "default" else d.target
            target = merged.get(compiled)
            if target is not None and target.is_abstract:
                diags.append(Diagnostic(
                    ERROR, ABSTRACT_IMPORT_VIOLATION,
                    f"non-abstract module {name} imports abstract module {compiled}", d.loc))
    return diags


# ------------------------------------------------------------------ adherence


def _signature(d):
    if isinstance(d, A.FunctionDecl):
        return ("function", d.is_predicate, d.is_protected, tuple(p.type for p in d.params), d.result)
    if isinstance(d, A.MethodDecl):
        return ("method", d.form, tuple(p.type for p in d.params), tuple(p.type for p in d.outs))
    if isinstance(d, A.FieldDecl):
        return ("field", d.type, d.ghost)
    return (type(d).__name__,)


def _adheres_decl(cand, sig, where: str, lookup, graph, seen) -> Optional[str]:
    if isinstance(sig, A.ImportDecl):
        if not isinstance(cand, A.ImportDecl):
            return f"{where}{sig.name} is not an import"
        if cand.target == sig.target:
            return None
        ok, why = _adheres(cand.target, sig.target, lookup, graph, seen)
        return None if ok else f"import {where}{sig.name}: {why}"
    if isinstance(sig, A.TypeDecl):
        if not isinstance(cand, A.TypeDecl):
            return f"{where}{sig.name} is not a type"
        if sig.form != "opaque" and cand != sig:
            return f"type {where}{sig.name} has a different definition"
        return None
    if isinstance(sig, A.ClassDecl):
        if not isinstance(cand, A.ClassDecl):
            return f"{where}{sig.name} is not a class"
        cm = {A.member_key(x): x for x in cand.members}
        for s in sig.members:
            c = cm.get(A.member_key(s))
            if c is None:
                return f"missing member {where}{sig.name}.{A.member_key(s)}"
            why = _adheres_decl(c, s, f"{where}{sig.name}.", lookup, graph, seen)
            if why:
                return why
        return None
    if type(cand) is not type(sig) or _signature(cand) != _signature(sig):
        return f"{where}{A.member_key(sig)} has a different kind or signature"
    for clause in getattr(sig, "specs", ()):
        if clause not in cand.specs:
            return f"{where}{A.member_key(sig)} lacks a specification clause"
    return None


def _adheres(candidate: str, target: str, lookup, graph, seen) -> tuple:
    if candidate == target or graph.refines_transitively(candidate, target):
        return True, ""
    key = (candidate, target)
    if key in seen:
        return True, ""
    seen.add(key)
    cand, sig = lookup(candidate), lookup(target)
    cm = {A.member_key(d): d for d in cand.decls}
    for s in sig.decls:
        c = cm.get(A.member_key(s))
        if c is None:
            return False, f"module {candidate} lacks {A.member_key(s)} required by {target}"
        why = _adheres_decl(c, s, "", lookup, graph, seen)
        if why:
            return False, f"module {candidate} does not adhere to {target}: {why}"
    return True, ""


def check_adherence(candidate: str, abstract_sig: str, graph: ModuleGraph,
                    lookup: Callable[[str], A.ModuleDecl], loc=None) -> tuple:
    """Return (ok, diagnostics). `lookup` yields merged modules by name."""
    ok, why = _adheres(candidate, abstract_sig, lookup, graph, set())
    if ok:
        return True, []
    where = loc if loc is not None else lookup(candidate).loc
    return False, [Diagnostic(ERROR, ADHERENCE_FAILURE, why, where)]


def tighten_import(base: ImportBinding, refined: ImportBinding, graph: ModuleGraph,
                   lookup: Callable[[str], A.ModuleDecl], loc) -> ImportBinding:
    """Binding a refining module ends up with when it redeclares an import."""
    if base == refined:
        return base
    if base.mode == "eq":
        raise RefineError(f"import {base.local_name} = {base.target} cannot be changed in a refinement",
                          loc, ILLEGAL_IMPORT_CHANGE)
    for new_target in (refined.target, refined.default):
        if new_target is None:
            continue
        ok, diags = check_adherence(new_target, base.target, graph, lookup, loc)
        if not ok:
            raise RefineError(diags[0].message, loc, ADHERENCE_FAILURE)
    return refined


# ------------------------------------------------------------------ name checking


_BUILTIN_TYPES = {"int", "bool", "object", "set", "seq"}


class NameChecker:
    """Every identifier use must resolve to exactly one declaration."""

    def __init__(self, env, module_name: str):
        self.env = env
        self.info = env.module(module_name)
        self.diags: list = []

    def report(self, msg, loc):
        self.diags.append(Diagnostic(ERROR, UNRESOLVED_NAME, msg, loc))

    def run(self) -> list:
        for d in self.info.decl.decls:
            self.decl(d, None)
        return self.diags

    def type_ok(self, t: A.TypeRef, loc):
        if t is None:
            return
        if t.name in _BUILTIN_TYPES:
            for a in t.args:
                self.type_ok(a, loc)
            return
        if self.env.lookup_type(self.info, t.name) is None:
            self.report(f"unknown type {t.name}", t.loc if t.loc.file != "<builtin>" else loc)

    def decl(self, d, cls):
        if isinstance(d, A.ClassDecl):
            ci = self.info.classes[d.name]
            for m in d.members:
                self.decl(m, ci)
        elif isinstance(d, A.FieldDecl):
            self.type_ok(d.type, d.loc)
        elif isinstance(d, A.TypeDecl):
            if d.synonym is not None:
                self.type_ok(d.synonym, d.loc)
            for c in d.ctors:
                for t in c.arg_types:
                    self.type_ok(t, c.loc)
        elif isinstance(d, (A.FunctionDecl, A.MethodDecl)):
            scope = {p.name for p in d.params}
            for p in d.params:
                self.type_ok(p.type, p.loc)
            outs = {p.name for p in getattr(d, "outs", ())}
            for s in d.specs:
                exprs = (s.expr,) if hasattr(s, "expr") else getattr(s, "frame", None) or getattr(s, "exprs", ())
                sc = scope | outs if isinstance(s, A.Ensures) else scope
                for e in exprs:
                    self.expr(e, sc, cls)
            if isinstance(d, A.FunctionDecl):
                if d.body is not None:
                    self.expr(d.body, scope, cls)
            elif d.body is not None:
                self.block(d.body, set(scope | outs), cls)

    def block(self, b: A.Block, scope: set, cls):
        scope = set(scope)
        for s in b.stmts:
            self.stmt(s, scope, cls)

    def stmt(self, s, scope: set, cls):
        if isinstance(s, A.Block):
            self.block(s, scope, cls)
        elif isinstance(s, A.VarDecl):
            for t in s.types:
                self.type_ok(t, s.loc)
            if s.init is not None:
                inner = set(scope) | set(s.names) if isinstance(s.init, A.AssignSuchThat) else scope
                self.rhs(s.init, inner, cls)
            scope.update(s.names)
        elif isinstance(s, A.Assign):
            for e in s.lhs + s.rhs:
                self.expr(e, scope, cls)
        elif isinstance(s, A.AssignSuchThat):
            for e in s.lhs:
                self.expr(e, scope, cls)
            self.expr(s.cond, scope, cls)
        elif isinstance(s, A.New):
            self.expr(s.lhs, scope, cls)
            self.rhs(s, scope, cls)
        elif isinstance(s, A.Call):
            for e in s.lhs:
                self.expr(e, scope, cls)
            self.rhs(s, scope, cls)
        elif isinstance(s, A.If):
            if isinstance(s.guard, A.Expr):
                self.expr(s.guard, scope, cls)
            self.block(s.then, scope, cls)
            if s.else_ is not None:
                self.block(s.else_, scope, cls)
        elif isinstance(s, A.While):
            if isinstance(s.guard, A.Expr):
                self.expr(s.guard, scope, cls)
            for e in s.invariants + s.decreases:
                self.expr(e, scope, cls)
            self.block(s.body, scope, cls)
        elif isinstance(s, (A.Assert, A.Assume)):
            if isinstance(s.cond, A.Expr):
                self.expr(s.cond, scope, cls)
        elif isinstance(s, A.Return):
            for e in s.values:
                self.expr(e, scope, cls)
        elif isinstance(s, A.Modify):
            if isinstance(s.frame, tuple):
                for e in s.frame:
                    self.expr(e, scope, cls)
            if s.body is not None:
                self.block(s.body, scope, cls)
        elif isinstance(s, A.Labeled):
            self.stmt(s.stmt, scope, cls)

    def rhs(self, init, scope, cls):
        if isinstance(init, A.Assign):
            for e in init.rhs:
                self.expr(e, scope, cls)
        elif isinstance(init, A.AssignSuchThat):
            self.expr(init.cond, scope, cls)
        elif isinstance(init, A.New):
            if self.env.lookup_class(self.info, init.cls.name) is None:
                self.report(f"unknown class {init.cls.name}", init.loc)
            for e in init.args:
                self.expr(e, scope, cls)
        elif isinstance(init, A.Call):
            self.expr(A.Apply(init.callee, init.args, init.loc), scope, cls)

    def expr(self, e, scope: set, cls):
        if isinstance(e, A.Name):
            if e.name in scope:
                return
            if self.env.lookup_member(self.info, cls, e.name) is not None:
                return
            if self.env.lookup_datatype_ctor(self.info, e.name) is not None:
                return
            self.report(f"unresolved name {e.name}", e.loc)
        elif isinstance(e, A.Field):
            if isinstance(e.obj, A.Name) and e.obj.name not in scope and e.obj.name in self.info.imports:
                target = self.env.imported(self.info, e.obj.name)
                if target is None or self.env.lookup_member(target, None, e.name) is None:
                    self.report(f"unresolved name {e.obj.name}.{e.name} (import {e.obj.name})", e.loc)
                return
            self.expr(e.obj, scope, cls)
            if not self.env.any_class_has(self.info, e.name):
                self.report(f"no visible class declares member {e.name}", e.loc)
        elif isinstance(e, A.Apply):
            if isinstance(e.callee, A.Name) and e.callee.name not in scope:
                if (self.env.lookup_member(self.info, cls, e.callee.name) is None
                        and self.env.lookup_datatype_ctor(self.info, e.callee.name) is None):
                    self.report(f"unresolved name {e.callee.name}", e.callee.loc)
            else:
                self.expr(e.callee, scope, cls)
            for a in e.args:
                self.expr(a, scope, cls)
        elif isinstance(e, A.Match):
            self.expr(e.scrutinee, scope, cls)
            for c in e.cases:
                if self.env.lookup_datatype_ctor(self.info, c.ctor) is None:
                    self.report(f"unknown constructor {c.ctor}", c.loc)
                self.expr(c.body, scope | set(c.vars), cls)
        else:
            for k in A.children(e):
                self.expr(k, scope, cls)


def check_names(env, module_name: str) -> list:
    return NameChecker(env, module_name).run()


def warn(code: str, msg: str, loc) -> Diagnostic:
    return Diagnostic(WARNING, code, msg, loc)

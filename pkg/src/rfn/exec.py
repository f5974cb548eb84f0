"""Ghost erasure and a deterministic interpreter for concrete modules."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from typing import Optional

from .diagnostics import ERROR, NOWHERE, Diagnostic, RefineError
from .env import ProgramEnv
from .semantics import (
    BreakSignal, Frame, Ref, ReturnSignal, Semantics, Target, Trap, is_ghost_member, render_value,
)
from .syntax import ast as A
from .verify.obligations import Scope

RESIDUAL_NONDETERMINISM = "RESIDUAL_NONDETERMINISM"
GHOST_DEPENDENCY = "GHOST_DEPENDENCY"
ABSTRACT_MODULE_NOT_COMPILABLE = "ABSTRACT_MODULE_NOT_COMPILABLE"
NOT_COMPILABLE = "NOT_COMPILABLE"

NULL_DEREFERENCE = "NULL_DEREFERENCE"
DIVISION_BY_ZERO = "DIVISION_BY_ZERO"
INDEX_OUT_OF_RANGE = "INDEX_OUT_OF_RANGE"
ASSERTION_VIOLATION = "ASSERTION_VIOLATION"
CALL_DEPTH_EXCEEDED = "CALL_DEPTH_EXCEEDED"
NONDETERMINISM = "NONDETERMINISM"

MAX_CALL_DEPTH = 150
RECURSION_LIMIT = 20_000  # interpreter frames per call level, times MAX_CALL_DEPTH, with headroom


class EraseError(RefineError):
    """Carries every erasure diagnostic in `all`, sorted by location."""

    def __init__(self, message, loc=NOWHERE, code=None, diagnostics=None):
        super().__init__(message, loc, code)
        self.all = diagnostics if diagnostics is not None else [self.diagnostic()]


# ------------------------------------------------------------------ ghost analysis


class GhostScope(Scope):
    """Static view of one member that knows which locals and fields are ghost."""

    def __init__(self, env: ProgramEnv, mod, cls, decl):
        super().__init__(env, mod, cls)
        self.ghost_locals: set = set()
        for p in tuple(decl.params) + tuple(getattr(decl, "outs", ())):
            self.declare(p.name, env.resolve_type(mod, p.type))

    def declare_var(self, s: A.VarDecl):
        for name, t in zip(s.names, s.types):
            rt = self.env.resolve_type(self.mod, t) if t is not None else None
            if rt is None and isinstance(s.init, A.Assign) and len(s.init.rhs) == len(s.names):
                rt = self.type_of(s.init.rhs[s.names.index(name)])
            if rt is None and isinstance(s.init, A.New):
                cls = self.env.lookup_class(self.mod, s.init.cls.name)
                rt = ("class", cls) if cls is not None else None
            self.declare(name, rt)
            if s.ghost:
                self.ghost_locals.add(name)
            else:
                self.ghost_locals.discard(name)

    def ghost_field(self, cls, name: str) -> bool:
        f = cls.fields.get(name) if cls is not None else None
        return f is not None and f.ghost

    def is_ghost_target(self, lhs) -> bool:
        if isinstance(lhs, A.Name):
            if lhs.name in self.types:
                return lhs.name in self.ghost_locals
            return self.ghost_field(self.cls, lhs.name)
        if isinstance(lhs, A.Field):
            t = self.type_of(lhs.obj)
            return t is not None and t[0] == "class" and self.ghost_field(t[1], lhs.name)
        return False

    def ghost_read(self, e) -> Optional[str]:
        """Description of the first ghost entity `e` reads, or None."""
        for n in A.walk(e):
            if isinstance(n, A.Name):
                if n.name in self.types:
                    if n.name in self.ghost_locals:
                        return f"ghost variable {n.name}"
                elif self.ghost_field(self.cls, n.name):
                    return f"ghost field {n.name}"
            elif isinstance(n, A.Field) and not self.is_qualifier(n.obj):
                t = self.type_of(n.obj)
                if t is not None and t[0] == "class" and self.ghost_field(t[1], n.name):
                    return f"ghost field {n.name}"
            elif isinstance(n, A.Apply):
                c = self.callee(n.callee)
                if c is not None and is_ghost_member(c[1]):
                    return f"{'function' if c[0] == 'function' else 'lemma'} {c[1].name}"
            elif isinstance(n, A.Old):
                return "old(...)"
            elif isinstance(n, A.Fresh):
                return "fresh(...)"
        return None


class Eraser:
    """Removes ghost code from one concrete module; collects every erasure error."""

    def __init__(self, env: ProgramEnv, mod_name: str):
        self.env = env
        self.mod = env.module(mod_name)
        self.errors: list = []

    def fail(self, code: str, message: str, loc):
        self.errors.append(Diagnostic(ERROR, code, message, loc))

    def module(self) -> A.ModuleDecl:
        decl = self.mod.decl
        out = []
        for d in decl.decls:
            if isinstance(d, A.ClassDecl):
                ci = self.mod.classes[d.name]
                members = []
                for m in d.members:
                    if isinstance(m, A.FieldDecl):
                        if not m.ghost:
                            members.append(m)
                    elif not is_ghost_member(m):
                        members.append(self.member(m, ci))
                out.append(replace(d, members=tuple(members)))
            elif isinstance(d, (A.FunctionDecl, A.MethodDecl)):
                if not is_ghost_member(d):
                    out.append(self.member(d, None))
            else:
                out.append(d)
        return replace(decl, decls=tuple(out))

    def member(self, d: A.MethodDecl, cls) -> A.MethodDecl:
        if d.body is None:
            self.fail(NOT_COMPILABLE, f"method {d.name or 'constructor'} has no body", d.loc)
            return replace(d, specs=())
        gs = GhostScope(self.env, self.mod, cls, d)
        body = self.block(d.body, gs)
        return replace(d, specs=(), body=body)

    def block(self, b: A.Block, gs: GhostScope) -> A.Block:
        out = []
        for s in b.stmts:
            r = self.stmt(s, gs)
            if r is not None:
                out.append(r)
        return replace(b, stmts=tuple(out))

    def check_reads(self, exprs, gs: GhostScope, what: str, loc):
        for e in exprs:
            g = gs.ghost_read(e)
            if g is not None:
                self.fail(GHOST_DEPENDENCY, f"{what} reads {g}", getattr(e, "loc", loc))
                return

    def stmt(self, s, gs: GhostScope):
        if isinstance(s, A.Block):
            return self.block(s, gs)
        if isinstance(s, A.Labeled):
            inner = self.stmt(s.stmt, gs)
            return replace(s, stmt=inner) if inner is not None else None
        if isinstance(s, A.VarDecl):
            gs.declare_var(s)
            if s.ghost:
                return None
            init = self.stmt(s.init, gs) if s.init is not None else None
            return replace(s, init=init)
        if isinstance(s, A.Assign):
            ghost = [gs.is_ghost_target(x) for x in s.lhs]
            if all(ghost):
                return None
            if len(s.rhs) == 1 and len(s.lhs) > 1:
                self.check_reads(s.rhs, gs, "call", s.loc)
                return s
            keep = [(x, r) for x, r, g in zip(s.lhs, s.rhs, ghost) if not g]
            self.check_reads([r for _x, r in keep], gs, "assignment", s.loc)
            self.check_reads([x.obj for x, _r in keep if isinstance(x, A.Field)], gs, "assignment", s.loc)
            return replace(s, lhs=tuple(x for x, _ in keep), rhs=tuple(r for _, r in keep))
        if isinstance(s, A.AssignSuchThat):
            if all(gs.is_ghost_target(x) for x in s.lhs):
                return None
            if s.assume:
                self.fail(NOT_COMPILABLE, "an assume-marked assign-such-that is not intended to be compiled", s.loc)
            else:
                self.fail(RESIDUAL_NONDETERMINISM, "assign-such-that remains in a compiled module", s.loc)
            return None
        if isinstance(s, A.New):
            self.check_reads(s.args, gs, "constructor argument", s.loc)
            return s
        if isinstance(s, A.Call):
            c = gs.callee(s.callee)
            if c is not None and is_ghost_member(c[1]):
                return None
            self.check_reads(s.args, gs, "call argument", s.loc)
            if isinstance(s.callee, A.Field) and not gs.is_qualifier(s.callee.obj):
                self.check_reads([s.callee.obj], gs, "call receiver", s.loc)
            return s
        if isinstance(s, A.If):
            if isinstance(s.guard, A.Star):
                self.fail(RESIDUAL_NONDETERMINISM, "`if *` remains in a compiled module", s.loc)
            else:
                self.check_reads([s.guard], gs, "if condition", s.loc)
            then = self.block(s.then, gs)
            else_ = self.block(s.else_, gs) if s.else_ is not None else None
            return replace(s, then=then, else_=else_)
        if isinstance(s, A.While):
            if isinstance(s.guard, A.Star):
                self.fail(RESIDUAL_NONDETERMINISM, "`while *` remains in a compiled module", s.loc)
            else:
                self.check_reads([s.guard], gs, "loop condition", s.loc)
            return replace(s, invariants=(), decreases=(), body=self.block(s.body, gs))
        if isinstance(s, (A.Assert, A.Assume)):
            return None
        if isinstance(s, A.Return):
            self.check_reads(s.values, gs, "return value", s.loc)
            return s
        if isinstance(s, A.Break):
            return s
        if isinstance(s, A.Modify):
            if s.body is None:
                self.fail(RESIDUAL_NONDETERMINISM, "`modify` without a body remains in a compiled module", s.loc)
                return None
            return self.block(s.body, gs)
        return s


def ghost_dependencies(env: ProgramEnv, mod_name: str) -> list:
    """GHOST_DEPENDENCY diagnostics of a concrete module (non-ghost code reading ghost state)."""
    e = Eraser(env, mod_name)
    e.module()
    return [d for d in e.errors if d.code == GHOST_DEPENDENCY]


@dataclass
class ErasedProgram:
    modules: dict  # name -> ModuleDecl without ghost code
    entry_module: str
    env: ProgramEnv = field(init=False)

    def __post_init__(self):
        self.env = ProgramEnv(self.modules, mode="compile")


def erase_ghost(frontend, module_name: str) -> ErasedProgram:
    """Erase the module and everything it imports (compiler view of `as ... default`)."""
    env = frontend.env("compile")
    if module_name not in env.modules:
        raise EraseError(f"unknown module {module_name}", code="UNKNOWN_MODULE")
    modules = {}
    errors = []
    for info in env.visible_modules(env.module(module_name)):
        if info.decl.is_abstract:
            raise EraseError(f"module {info.name} is abstract and is not compiled", info.decl.loc,
                             ABSTRACT_MODULE_NOT_COMPILABLE)
        e = Eraser(env, info.name)
        modules[info.name] = e.module()
        errors.extend(e.errors)
    if errors:
        errors.sort(key=Diagnostic.sort_key)
        raise EraseError(errors[0].message, errors[0].location, errors[0].code, errors)
    return ErasedProgram(modules, module_name)


# ------------------------------------------------------------------ interpreter


def default_value(rtype):
    if rtype is None:
        return None
    return {"int": 0, "bool": False, "set": frozenset(), "seq": ()}.get(rtype[0])


@dataclass
class RunResult:
    outputs: list  # [(name, value)]
    trace: list  # branch decisions, "Module.Member: if at line L: then|else"
    objects: dict  # oid -> (class name, {field: value})

    def output_lines(self) -> list:
        return [render_value(v) for _n, v in self.outputs]


class Interpreter(Semantics):
    """Big-step execution. With `runtime_checks`, asserts and assumes are evaluated and must hold."""

    def __init__(self, env: ProgramEnv, runtime_checks: bool = False):
        super().__init__(env)
        self.runtime_checks = runtime_checks
        self.trace: list = []

    def trap(self, code: str, message: str, node):
        loc = getattr(node, "loc", None)
        return Trap(code, message, loc)

    def initial_field(self, cls, name):
        return default_value(self.field_type(cls, name))

    def default_local(self, t, fr):
        return default_value(self.env.resolve_type(fr.module, t)) if t is not None else None

    def wf(self, ok: bool, node, message: str, fr: Frame):
        if ok:
            return
        if isinstance(node, A.Binary) and node.op in ("/", "%"):
            raise self.trap(DIVISION_BY_ZERO, "division by zero", node)
        if isinstance(node, A.Index):
            raise self.trap(INDEX_OUT_OF_RANGE, "index out of range", node)
        raise self.trap(NULL_DEREFERENCE, "null dereference", node)

    def revealed(self, t: Target, fr: Frame) -> bool:
        return t.decl.body is not None

    def apply_uninterpreted(self, t, args, node, fr):
        raise self.trap(NOT_COMPILABLE, f"function {t.decl.name} has no body", node)

    def depth_exceeded(self, node):
        return self.trap(CALL_DEPTH_EXCEEDED, "call depth limit exceeded", node)

    def choose_guard(self, node) -> bool:
        raise self.trap(NONDETERMINISM, "`if *` cannot be executed", node)

    def branch_taken(self, s, take: bool):
        self.trace.append(f"{self.current}: if at line {s.loc.line}: {'then' if take else 'else'}")

    current = ""

    def exec_while(self, s: A.While, fr: Frame):
        if isinstance(s.guard, A.Star):
            raise self.trap(NONDETERMINISM, "`while *` cannot be executed", s)
        while self.truth(s.guard, fr):
            try:
                self.exec(s.body, fr)
            except BreakSignal:
                break

    def exec_such_that(self, s, fr):
        raise self.trap(NONDETERMINISM, "assign-such-that cannot be executed", s)

    def exec_modify(self, s: A.Modify, fr: Frame):
        if s.body is None:
            raise self.trap(NONDETERMINISM, "`modify` without a body cannot be executed", s)
        self.exec(s.body, fr)

    def exec_assert(self, s: A.Assert, fr: Frame):
        if self.runtime_checks and not self.truth(s.cond, fr):
            raise self.trap(ASSERTION_VIOLATION, "assertion does not hold", s)

    def exec_assume(self, s: A.Assume, fr: Frame):
        if self.runtime_checks and not self.truth(s.cond, fr):
            raise self.trap(ASSERTION_VIOLATION, "assumption does not hold", s)

    def call(self, t: Target, args: list, node, fr: Frame, lhs_count: int):
        d = t.decl
        if d.body is None:
            raise self.trap(NOT_COMPILABLE, f"method {d.name} has no body", node)
        sub = Frame(t.module, t.cls, t.receiver, d, t.path, home=t.module.name)
        for p, a in zip(d.params, args):
            sub.locals[p.name] = a
            sub.types[p.name] = self.env.resolve_type(t.module, p.type)
        for p in d.outs:
            sub.types[p.name] = self.env.resolve_type(t.module, p.type)
            sub.locals[p.name] = default_value(sub.types[p.name])
        sub.old = self.snapshot() if self.runtime_checks else None
        sub.entry_clock = self.clock
        saved = self.current
        self.current = t.qualified
        self.depth_guard(node)
        try:
            self.exec(d.body, sub)
        except ReturnSignal:
            pass
        except BreakSignal as b:
            raise self.trap(NOT_COMPILABLE, "break outside a loop", b.stmt)
        finally:
            self.call_depth -= 1
            self.current = saved
        return [sub.locals[p.name] for p in d.outs]

    def new_object(self, cls, args, node, fr) -> Ref:
        ref = self.allocate(cls)
        ctor = cls.members.get(A.CTOR_KEY)
        if ctor is not None:
            t = Target("method", ctor, self.env.module(cls.module), cls, ref, f"{cls.name}.{A.CTOR_KEY}")
            self.call(t, list(args), node, fr, 0)
        return ref

    def heap(self) -> dict:
        return {oid: (o.cls.name, dict(o.fields)) for oid, o in self.objects.items()}


def find_entry(env: ProgramEnv, module_name: str, entry: str):
    """(module, class, decl, path) for `Member`, `Class.Member`, or `Module.Member` names."""
    mod = env.module(module_name)
    parts = entry.split(".")
    if len(parts) >= 2 and parts[0] in env.modules and parts[0] not in mod.classes:
        mod = env.module(parts[0])
        parts = parts[1:]
    if len(parts) == 1 and parts[0] in mod.members:
        return mod, None, mod.members[parts[0]], parts[0]
    if len(parts) == 2 and parts[0] in mod.classes and parts[1] in mod.classes[parts[0]].members:
        ci = mod.classes[parts[0]]
        return mod, ci, ci.members[parts[1]], entry
    return None


def parse_arg(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    if text == "null":
        return None
    return int(text)


def interpret(program, entry: str, args=(), runtime_checks: bool = False) -> RunResult:
    """Run `entry` of an erased program (or, given a frontend-built env, the unerased program)."""
    env = program.env
    found = find_entry(env, program.entry_module, entry)
    if found is None:
        raise LookupError(f"no method {entry} in module {program.entry_module}")
    mod, cls, decl, path = found
    if not isinstance(decl, A.MethodDecl) or decl.form != "method":
        raise LookupError(f"{entry} is not a method")
    if len(args) != len(decl.params):
        raise ValueError(f"{entry} expects {len(decl.params)} argument(s), got {len(args)}")
    it = Interpreter(env, runtime_checks)
    receiver = None
    if cls is not None:
        receiver = it.allocate(cls)
    t = Target("method", decl, mod, cls, receiver, path)
    root = Frame(mod, None, None, decl, path, home=mod.name)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, RECURSION_LIMIT))
    try:
        outs = it.call(t, list(args), decl, root, len(decl.outs))
    except RecursionError:
        raise Trap(CALL_DEPTH_EXCEEDED, "call depth limit exceeded", decl.loc)
    finally:
        sys.setrecursionlimit(limit)
    return RunResult([(p.name, v) for p, v in zip(decl.outs, outs)], it.trace, it.heap())


@dataclass
class UnerasedProgram:
    """The full program with ghost state tracked, for runtime checking and erasure differentials."""

    env: ProgramEnv
    entry_module: str


def unerased(frontend, module_name: str) -> UnerasedProgram:
    return UnerasedProgram(frontend.env("compile"), module_name)

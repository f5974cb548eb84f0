"""Proof obligation generation and inherited-vs-new classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..diagnostics import SourceLocation
from ..env import BOOL_T, INT_T, OBJECT_T, ClassInfo, ModuleInfo, ProgramEnv
from ..merge import DEFINED, EXTENDED, INHERITED, MergedModule
from ..syntax import ast as A
from ..syntax.printer import expr_str

KINDS = (
    "WellFormed", "SuchThatFeasible", "TightenUp", "AssumeToAssert", "Assert", "NewEnsures",
    "InheritedEnsures", "Termination", "LoopInvInit", "LoopInvMaintain", "ReturnPost", "CallPre",
    "FrameMethod", "FrameModify", "DivergenceCall", "ReadsCheck",
)
NEW = "New"
INHERITED_STATUS = "Inherited"

# kinds whose formula must be established (not assumed) at their program point
ESTABLISHING = {"NewEnsures", "InheritedEnsures", "CallPre", "LoopInvInit", "LoopInvMaintain",
                "Assert", "AssumeToAssert", "ReturnPost"}
# kinds that only arise from this refinement step's own changes
INTRINSICALLY_NEW = {"TightenUp", "AssumeToAssert", "ReturnPost", "NewEnsures"}


@dataclass(eq=False)
class Obligation:
    kind: str
    module: str
    member: str
    loc: SourceLocation
    formula: A.Expr
    context: A.Expr
    anchor: object
    status: str = NEW
    index: int = 0
    text: str = ""  # rendering when the formula alone is not self-explanatory
    callee: str = ""
    measure_old: tuple = ()
    measure_new: tuple = ()
    static_verdict: Optional[str] = None  # decided without enumeration (ReadsCheck)
    static_message: str = ""
    stmt: object = None  # innermost statement the obligation arises from

    @property
    def slot(self) -> str:
        return "Ensures" if self.kind in ("NewEnsures", "InheritedEnsures") else self.kind

    @property
    def key(self) -> tuple:
        return (self.slot, id(self.anchor))

    @property
    def origin(self) -> str:
        return f"{self.module}.{self.member}"

    def formula_text(self) -> str:
        return self.text or expr_str(self.formula)

    def smt_name(self) -> str:
        return f"{self.module}.{self.member}.{self.index}.smt2"


# ------------------------------------------------------------------ static typing


class Scope:
    """Static types of locals and enough resolution to find callees."""

    def __init__(self, env: ProgramEnv, mod: ModuleInfo, cls: Optional[ClassInfo]):
        self.env = env
        self.mod = mod
        self.cls = cls
        self.types: dict = {}

    def declare(self, name: str, t):
        self.types[name] = t

    def is_qualifier(self, e) -> bool:
        return (isinstance(e, A.Name) and e.name not in self.types
                and not (self.cls is not None and e.name in self.cls.fields)
                and e.name in self.mod.imports)

    def field_type(self, cls: ClassInfo, name: str):
        f = cls.fields.get(name)
        if f is None:
            return None
        return self.env.resolve_type(self.env.module(cls.module), f.type)

    def type_of(self, e):
        if isinstance(e, A.IntLit):
            return INT_T
        if isinstance(e, A.BoolLit):
            return BOOL_T
        if isinstance(e, A.NullLit):
            return OBJECT_T
        if isinstance(e, A.This):
            return ("class", self.cls) if self.cls is not None else None
        if isinstance(e, A.Name):
            if e.name in self.types:
                return self.types[e.name]
            if self.cls is not None and e.name in self.cls.fields:
                return self.field_type(self.cls, e.name)
            c = self.env.lookup_datatype_ctor(self.mod, e.name)
            return ("datatype", self.mod.name, c[0]) if c else None
        if isinstance(e, A.Field):
            if self.is_qualifier(e.obj):
                return None
            t = self.type_of(e.obj)
            if t is not None and t[0] == "class":
                return self.field_type(t[1], e.name)
            return None
        if isinstance(e, (A.Chain, A.Fresh)):
            return BOOL_T
        if isinstance(e, A.Unary):
            return BOOL_T if e.op == "!" else INT_T
        if isinstance(e, A.Binary):
            if e.op in ("&&", "||", "==>", "<==>", "==", "!=", "≠", "in", "!in"):
                return BOOL_T
            lt = self.type_of(e.left)
            if lt is not None and lt[0] in ("set", "seq"):
                return lt
            if e.op in ("<", "<=", ">", ">="):
                return BOOL_T
            return INT_T
        if isinstance(e, A.Old):
            return self.type_of(e.operand)
        if isinstance(e, A.Ite):
            return self.type_of(e.then)
        if isinstance(e, A.Length):
            return INT_T
        if isinstance(e, A.Index):
            t = self.type_of(e.seq)
            return t[1] if t is not None and t[0] == "seq" else None
        if isinstance(e, A.SetDisplay):
            inner = self.type_of(e.elems[0]) if e.elems else OBJECT_T
            return ("set", inner)
        if isinstance(e, A.SeqDisplay):
            return ("seq", self.type_of(e.elems[0]) if e.elems else INT_T)
        if isinstance(e, A.Apply):
            c = self.callee(e.callee)
            if c is None:
                return None
            kind, decl, mod, _cls, _path = c
            if kind == "function":
                return self.env.resolve_type(mod, decl.result)
            if kind == "ctor":
                return ("datatype", mod.name, mod.ctors[decl.name][0])
            return self.env.resolve_type(mod, decl.outs[0].type) if decl.outs else None
        return None

    def callee(self, c):
        """(kind, decl, module, class, path) for a callee expression, or None."""
        env = self.env
        if isinstance(c, A.Name):
            n = c.name
            if self.cls is not None and n in self.cls.members:
                d = self.cls.members[n]
                return (_kind(d), d, env.module(self.cls.module), self.cls, f"{self.cls.name}.{n}")
            if n in self.mod.members:
                d = self.mod.members[n]
                return (_kind(d), d, self.mod, None, n)
            ct = env.lookup_datatype_ctor(self.mod, n)
            if ct is not None:
                return ("ctor", ct[1], self.mod, None, n)
            return None
        if isinstance(c, A.Field):
            if self.is_qualifier(c.obj):
                mod = env.imported(self.mod, c.obj.name)
                if mod is None:
                    return None
                if c.name in mod.members:
                    d = mod.members[c.name]
                    return (_kind(d), d, mod, None, c.name)
                if c.name in mod.ctors:
                    return ("ctor", mod.ctors[c.name][1], mod, None, c.name)
                return None
            t = self.type_of(c.obj)
            if t is not None and t[0] == "class" and c.name in t[1].members:
                d = t[1].members[c.name]
                return (_kind(d), d, env.module(t[1].module), t[1], f"{t[1].name}.{c.name}")
        return None

    def constructor(self, type_name: str):
        cls = self.env.lookup_class(self.mod, type_name)
        if cls is None:
            return None
        d = cls.members.get(A.CTOR_KEY)
        return (cls, d)


def _kind(decl) -> str:
    return "function" if isinstance(decl, A.FunctionDecl) else "method"


# ------------------------------------------------------------------ call graph and measures


def _member_scope(env: ProgramEnv, mod: ModuleInfo, cls: Optional[ClassInfo], decl) -> Scope:
    sc = Scope(env, mod, cls)
    for p in tuple(decl.params) + tuple(getattr(decl, "outs", ())):
        sc.declare(p.name, env.resolve_type(mod, p.type))
    return sc


def _method_calls(sc: Scope, body):
    """Yield (node, callee tuple, args) for every method/constructor call in a body, declaring locals on the way."""
    for n in A.walk(body):
        if isinstance(n, A.VarDecl):
            for name, t in zip(n.names, n.types):
                if t is not None:
                    sc.declare(name, sc.env.resolve_type(sc.mod, t))
            init = n.init
            if isinstance(init, A.New):
                cls = sc.env.lookup_class(sc.mod, init.cls.name)
                for name in n.names:
                    if name not in sc.types and cls is not None:
                        sc.declare(name, ("class", cls))
            elif isinstance(init, A.Assign):
                for name, r in zip(n.names, init.rhs):
                    if name not in sc.types:
                        sc.declare(name, sc.type_of(r) or INT_T)
            elif isinstance(init, A.AssignSuchThat):
                for name in n.names:
                    sc.types.setdefault(name, INT_T)
        if isinstance(n, A.Assign) and len(n.rhs) == 1 and isinstance(n.rhs[0], A.Apply):
            c = sc.callee(n.rhs[0].callee)
            if c is not None and c[0] == "method":
                yield n.rhs[0], c, n.rhs[0].args
        elif isinstance(n, A.Call):
            c = sc.callee(n.callee)
            if c is not None and c[0] == "method":
                yield n, c, n.args
        elif isinstance(n, A.New):
            r = sc.constructor(n.cls.name)
            if r is not None and r[1] is not None:
                cls, d = r
                yield n, ("method", d, sc.env.module(cls.module), cls, f"{cls.name}.{A.CTOR_KEY}"), n.args


class CallGraph:
    def __init__(self, env: ProgramEnv):
        self.env = env
        self.edges: dict = {}

    def build(self, module_names):
        for name in module_names:
            mod = self.env.module(name)
            for path, decl, cls in _members(mod):
                key = (mod.name, path)
                out = self.edges.setdefault(key, set())
                if isinstance(decl, A.MethodDecl) and decl.body is not None:
                    sc = _member_scope(self.env, mod, cls, decl)
                    for _node, c, _args in _method_calls(sc, decl.body):
                        out.add((c[2].name, c[4]))
        return self

    def reaches(self, src, dst) -> bool:
        seen, stack = set(), [src]
        while stack:
            k = stack.pop()
            if k == dst:
                return True
            if k in seen:
                continue
            seen.add(k)
            stack.extend(self.edges.get(k, ()))
        return False

    def recursive(self, key) -> bool:
        return any(self.reaches(c, key) for c in self.edges.get(key, ()))


def _members(mod: ModuleInfo):
    for key, d in mod.members.items():
        yield key, d, None
    for cname, ci in mod.classes.items():
        for key, d in ci.members.items():
            yield f"{cname}.{key}", d, ci


def measure(decl, recursive: bool):
    """None for `decreases *`, else the tuple of measure expressions (possibly empty)."""
    d = A.decreases_of(decl)
    if d is not None:
        return None if d.star else tuple(d.exprs)
    if recursive:
        return tuple(A.Name(p.name, p.loc) for p in decl.params if p.type.name in ("int", "bool"))
    return ()


def lex_formula(new: tuple, old: tuple, types: list) -> A.Expr:
    """`new` strictly below `old` in the lexicographic order, as an expression."""
    n = max(len(new), len(old))
    disjuncts = []
    for i in range(n):
        if i >= len(new):
            break
        eqs = [A.Binary("==", new[j], old[j]) for j in range(i)]
        if i >= len(old):
            disjuncts.append(A.conjoin(eqs))
            break
        if types[i] == BOOL_T:
            less = A.Binary("&&", A.Unary("!", new[i]), old[i])
        else:
            less = A.Binary("&&", A.Binary("<", new[i], old[i]), A.Binary(">=", old[i], A.IntLit(0)))
        disjuncts.append(A.conjoin(eqs + [less]))
    if not disjuncts:
        return A.BoolLit(False)
    out = disjuncts[0]
    for d in disjuncts[1:]:
        out = A.Binary("||", out, d)
    return out


def _tuple_text(exprs) -> str:
    return "(" + ", ".join(expr_str(e) for e in exprs) + ")"


# ------------------------------------------------------------------ generation


class Generator:
    def __init__(self, env: ProgramEnv, mm: MergedModule, graph: CallGraph):
        self.env = env
        self.mm = mm
        self.mod = env.module(mm.name)
        self.graph = graph
        self.out: list = []
        self.returns = {id(r) for r in mm.superimposed_returns}

    def emit(self, kind, member, loc, formula, ctx, anchor, stmt=None, **kw):
        ob = Obligation(kind, self.mm.name, member, loc, formula, A.conjoin(ctx), anchor, stmt=stmt, **kw)
        self.out.append(ob)
        return ob

    def run(self) -> list:
        for path, decl, cls_decl in self.mm.members():
            cls = self.mod.classes.get(cls_decl.name) if cls_decl is not None else None
            if isinstance(decl, A.FunctionDecl):
                self.function(path, decl, cls)
            elif isinstance(decl, A.MethodDecl) and decl.body is not None:
                self.method(path, decl, cls)
        return self.out

    # ------------------------------------------------------------ functions

    def function(self, path, decl: A.FunctionDecl, cls):
        if decl.body is None:
            return
        self.scope = _member_scope(self.env, self.mod, cls, decl)
        self.member_path = path
        ctx = list(A.requires_of(decl))
        self.wf(path, decl.body, ctx, None)
        reads = A.frame_of(decl, A.Reads)
        if not reads_heap(decl.body, cls):
            return
        ok, why = reads_covered(decl.body, reads, cls)
        self.emit("ReadsCheck", path, decl.loc, A.BoolLit(ok), ctx, decl,
                  text=f"reads of {decl.name} covered by {{{', '.join(expr_str(r) for r in reads)}}}",
                  static_verdict="Valid" if ok else "Imprecise", static_message=why)

    # ------------------------------------------------------------ methods

    def method(self, path, decl: A.MethodDecl, cls):
        sc = _member_scope(self.env, self.mod, cls, decl)
        key = (self.mod.name, path)
        self.member_key = key
        self.member_path = path
        self.member_measure = measure(decl, self.graph.recursive(key))
        self.scope = sc
        self.decl = decl
        ctx = list(A.requires_of(decl))
        self.stmt(decl.body, ctx)
        origin = self.mm.member_origin.get(path)
        delta = self.mm.spec_delta.get(path)
        added = {id(e) for e in delta.added_ensures} if delta else set()
        for clause in A.specs_of(decl, A.Ensures):
            kind = "NewEnsures" if (id(clause) in added or origin == EXTENDED) else "InheritedEnsures"
            self.emit(kind, path, clause.loc, clause.expr, ctx, clause)
        if A.frame_of(decl) or may_write_heap(decl.body, sc):
            frame = A.frame_of(decl)
            self.emit("FrameMethod", path, decl.loc, A.BoolLit(True), ctx, decl,
                      text=f"heap writes of {decl.name or 'constructor'} stay within "
                           f"{{{', '.join(expr_str(f) for f in frame)}}} or fresh objects")

    def stmt(self, s, ctx):
        path = self.member_path
        sc = self.scope
        if isinstance(s, A.Block):
            ctx = list(ctx)
            for x in s.stmts:
                self.stmt(x, ctx)
                ctx = self.after(x, ctx)
            return
        if isinstance(s, A.Labeled):
            self.stmt(s.stmt, ctx)
            return
        if isinstance(s, A.VarDecl):
            for n, t in zip(s.names, s.types):
                if t is not None:
                    sc.declare(n, self.env.resolve_type(self.mod, t))
            if s.init is not None:
                self.stmt(s.init, ctx)
                if isinstance(s.init, A.New):
                    cls = self.env.lookup_class(self.mod, s.init.cls.name)
                    for n in s.names:
                        if n not in sc.types and cls is not None:
                            sc.declare(n, ("class", cls))
                elif isinstance(s.init, A.Assign):
                    for n, r in zip(s.names, s.init.rhs):
                        if n not in sc.types:
                            sc.declare(n, self.rhs_type(r))
                else:
                    for n in s.names:
                        sc.types.setdefault(n, INT_T)
            self.tighten(s, ctx)
            return
        if isinstance(s, A.Assign):
            for lhs in s.lhs:
                if isinstance(lhs, A.Field):
                    self.wf(path, lhs.obj, ctx, s)
                    self.deref(lhs, ctx, s)
            if len(s.rhs) == 1 and isinstance(s.rhs[0], A.Apply) and self.is_method(s.rhs[0].callee):
                self.call(s.rhs[0], s.rhs[0].callee, s.rhs[0].args, ctx, s)
            else:
                for r in s.rhs:
                    self.wf(path, r, ctx, s)
            self.tighten(s, ctx)
            return
        if isinstance(s, A.AssignSuchThat):
            if not s.assume:
                names = ", ".join(expr_str(x) for x in s.lhs)
                self.emit("SuchThatFeasible", path, s.loc, s.cond, ctx, s, s,
                          text=f"exists {names} :: {expr_str(s.cond)}")
            self.tighten(s, ctx)
            return
        if isinstance(s, A.New):
            for a in s.args:
                self.wf(path, a, ctx, s)
            r = self.scope.constructor(s.cls.name)
            if r is not None and r[1] is not None:
                self.call_obligations(s, ("method", r[1], self.env.module(r[0].module), r[0],
                                          f"{r[0].name}.{A.CTOR_KEY}"), s.args, ctx, s)
            return
        if isinstance(s, A.Call):
            self.call(s, s.callee, s.args, ctx, s)
            return
        if isinstance(s, A.If):
            if isinstance(s.guard, A.Expr):
                self.wf(path, s.guard, ctx, s)
                self.stmt(s.then, ctx + [s.guard])
                if s.else_ is not None:
                    self.stmt(s.else_, ctx + [A.Unary("!", s.guard)])
            else:
                self.stmt(s.then, ctx)
                if s.else_ is not None:
                    self.stmt(s.else_, ctx)
            return
        if isinstance(s, A.While):
            if isinstance(s.guard, A.Expr):
                self.wf(path, s.guard, ctx, s)
            for inv in s.invariants:
                self.emit("LoopInvInit", path, inv_loc(inv, s), inv, ctx, inv, s)
            inner = ctx + list(s.invariants) + ([s.guard] if isinstance(s.guard, A.Expr) else [])
            for inv in s.invariants:
                self.emit("LoopInvMaintain", path, inv_loc(inv, s), inv, inner, inv, s)
            if s.decreases:
                self.emit("Termination", path, s.loc, A.BoolLit(True), inner, s, s,
                          text=f"loop measure {_tuple_text(s.decreases)} decreases",
                          measure_old=tuple(s.decreases), measure_new=tuple(s.decreases))
            self.stmt(s.body, inner)
            return
        if isinstance(s, A.Assert):
            self.wf(path, s.cond, ctx, s)
            kind = "AssumeToAssert" if id(s) in self.mm.assume_to_assert else "Assert"
            self.emit(kind, path, s.loc, s.cond, ctx, s, s)
            return
        if isinstance(s, A.Assume):
            self.wf(path, s.cond, ctx, s)
            return
        if isinstance(s, A.Return):
            for v in s.values:
                self.wf(path, v, ctx, s)
            if id(s) in self.returns:
                post = A.conjoin(A.ensures_of(self.decl))
                self.emit("ReturnPost", path, s.loc, post, ctx, s, s)
            return
        if isinstance(s, A.Modify):
            if isinstance(s.frame, tuple):
                for e in s.frame:
                    self.wf(path, e, ctx, s)
            if s.body is not None:
                frame = ", ".join(expr_str(e) for e in s.frame) if isinstance(s.frame, tuple) else "..."
                self.emit("FrameModify", path, s.loc, A.BoolLit(True), ctx, s, s,
                          text=f"heap writes in the modify body stay within {{{frame}}} or fresh objects")
                self.stmt(s.body, ctx)
            return

    def after(self, s, ctx):
        if isinstance(s, (A.Assert, A.Assume)) and isinstance(s.cond, A.Expr):
            return ctx + [s.cond]
        return ctx

    def rhs_type(self, r):
        if isinstance(r, A.Apply):
            c = self.scope.callee(r.callee)
            if c is not None and c[0] == "method" and c[1].outs:
                return self.env.resolve_type(c[2], c[1].outs[0].type)
        return self.scope.type_of(r) or INT_T

    def is_method(self, callee) -> bool:
        c = self.scope.callee(callee)
        return c is not None and c[0] == "method"

    def tighten(self, s, ctx):
        b = self.mm.tightened.get(id(s))
        if b is None:
            return
        target = s.init if isinstance(s, A.VarDecl) else s
        base = b.init if isinstance(b, A.VarDecl) else b
        if isinstance(target, A.AssignSuchThat):
            formula = A.Binary("==>", target.cond, base.cond)
        elif isinstance(target, A.Assign):
            mapping = {x.name: r for x, r in zip(target.lhs, target.rhs) if isinstance(x, A.Name)}
            formula = A.substitute(base.cond, mapping)
        else:
            formula = base.cond
        self.emit("TightenUp", self.member_path, s.loc, formula, ctx, s, s)

    # ------------------------------------------------------------ calls

    def call(self, node, callee, args, ctx, stmt):
        path = self.member_path
        if isinstance(callee, A.Field) and not self.scope.is_qualifier(callee.obj):
            self.wf(path, callee.obj, ctx, stmt)
            self.deref(callee, ctx, stmt)
        for a in args:
            self.wf(path, a, ctx, stmt)
        c = self.scope.callee(callee)
        if c is None or c[0] != "method":
            return
        receiver = callee.obj if isinstance(callee, A.Field) and not self.scope.is_qualifier(callee.obj) else None
        self.call_obligations(node, c, args, ctx, stmt, receiver)

    def call_obligations(self, node, c, args, ctx, stmt, receiver=None):
        path = self.member_path
        _kind_, decl, mod, cls, cpath = c
        mapping = {p.name: a for p, a in zip(decl.params, args)}
        reqs = A.requires_of(decl)
        name = f"{mod.name}.{cpath}" if mod.name != self.mod.name else cpath
        if reqs:
            pre = A.conjoin(reqs)
            if receiver is not None and cls is not None:
                pre = rebase(pre, receiver, cls)
            pre = A.substitute(pre, mapping)
            self.emit("CallPre", path, node.loc, pre, ctx, node, stmt, callee=name)
        callee_key = (mod.name, cpath)
        callee_dec = A.decreases_of(decl)
        if self.member_measure is not None and callee_dec is not None and callee_dec.star:
            self.emit("DivergenceCall", path, node.loc, A.BoolLit(False), ctx, node, stmt, callee=name,
                      text=f"call to possibly diverging {name}")
            return
        if self.graph.reaches(callee_key, self.member_key) and self.member_measure is not None:
            callee_measure = measure(decl, True)
            if callee_measure is None:
                return
            new = tuple(A.substitute(e, mapping) for e in callee_measure)
            old = tuple(self.member_measure)
            types = [self.scope.type_of(e) or INT_T for e in old]
            types += [INT_T] * (len(new) - len(types))
            self.emit("Termination", path, node.loc, lex_formula(new, old, types), ctx, node, stmt,
                      callee=name, text=f"{_tuple_text(new)} <lex {_tuple_text(old)}",
                      measure_old=old, measure_new=tuple(callee_measure))

    # ------------------------------------------------------------ well-formedness

    def deref(self, field_node: A.Field, ctx, stmt):
        obj = field_node.obj
        if isinstance(obj, A.This) or self.scope.is_qualifier(obj):
            return
        self.emit("WellFormed", self.member_path, field_node.loc, A.Binary("!=", obj, A.NullLit()),
                  ctx, field_node, stmt)

    def wf(self, path, e, ctx, stmt):
        if not isinstance(e, A.Expr):
            return
        self._wf(path, e, list(ctx), stmt)

    def _wf(self, path, e, ctx, stmt):
        if isinstance(e, A.Binary) and e.op in ("&&", "||", "==>"):
            self._wf(path, e.left, ctx, stmt)
            guard = e.left if e.op != "||" else A.Unary("!", e.left)
            self._wf(path, e.right, ctx + [guard], stmt)
            return
        if isinstance(e, A.Ite):
            self._wf(path, e.cond, ctx, stmt)
            self._wf(path, e.then, ctx + [e.cond], stmt)
            self._wf(path, e.else_, ctx + [A.Unary("!", e.cond)], stmt)
            return
        if isinstance(e, A.Match):
            self._wf(path, e.scrutinee, ctx, stmt)
            for c in e.cases:
                self._wf(path, c.body, ctx, stmt)
            return
        if isinstance(e, A.Apply):
            if isinstance(e.callee, A.Field) and not self.scope.is_qualifier(e.callee.obj):
                self._wf(path, e.callee.obj, ctx, stmt)
                self.deref(e.callee, ctx, stmt)
            for a in e.args:
                self._wf(path, a, ctx, stmt)
            return
        for k in A.children(e):
            if isinstance(k, A.Expr):
                self._wf(path, k, ctx, stmt)
        if isinstance(e, A.Field):
            self.deref(e, ctx, stmt)
        elif isinstance(e, A.Index):
            f = A.Chain(("<=", "<"), (A.IntLit(0), e.index, A.Length(e.seq)))
            self.emit("WellFormed", path, e.loc, f, ctx, e, stmt)
        elif isinstance(e, A.Binary) and e.op in ("/", "%"):
            if not (isinstance(e.right, A.IntLit) and e.right.value != 0):
                self.emit("WellFormed", path, e.loc, A.Binary("!=", e.right, A.IntLit(0)), ctx, e, stmt)


def rebase(e, receiver, cls: ClassInfo):
    """View a member-relative expression from a caller holding `receiver`."""

    def fn(n):
        if isinstance(n, A.This):
            return receiver
        if isinstance(n, A.Name) and n.name in cls.fields:
            return A.Field(receiver, n.name, n.loc)
        if isinstance(n, A.Apply) and isinstance(n.callee, A.Name) and n.callee.name in cls.members:
            return A.Apply(A.Field(receiver, n.callee.name, n.callee.loc), n.args, n.loc)
        return None

    return A.transform(e, fn)


def inv_loc(inv, loop):
    loc = getattr(inv, "loc", None)
    return loc if loc is not None and loc.line else loop.loc


def may_write_heap(body, sc: Scope) -> bool:
    for n in A.walk(body):
        if isinstance(n, A.Modify):
            return True
        if isinstance(n, (A.Assign, A.AssignSuchThat)):
            for lhs in n.lhs:
                if isinstance(lhs, A.Field):
                    return True
                if isinstance(lhs, A.Name) and sc.cls is not None and lhs.name in sc.cls.fields:
                    return True
        if isinstance(n, A.New) and isinstance(n.lhs, A.Field):
            return True
        if isinstance(n, A.New) and isinstance(n.lhs, A.Name) and sc.cls is not None and n.lhs.name in sc.cls.fields:
            return True
        if isinstance(n, A.Apply) or isinstance(n, A.Call):
            c = sc.callee(n.callee)
            if c is not None and c[0] == "method" and A.frame_of(c[1]):
                return True
    return False


def reads_heap(body, cls) -> bool:
    return any(isinstance(n, A.Field) for n in A.walk(body)) or (
        cls is not None and any(isinstance(n, A.Name) and n.name in cls.fields for n in A.walk(body)))


def reads_covered(body, reads, cls) -> tuple:
    """Syntactic check: every field read is of `this` or of an object named in (or proved member of) the reads frame."""
    frame_exprs = list(reads)
    problems = []

    def visit(e, known):
        if isinstance(e, A.Binary) and e.op == "&&":
            visit(e.left, known)
            extra = set(known)
            for c in A.conjuncts(e.left):
                if isinstance(c, A.Binary) and c.op == "in" and any(c.right == f for f in frame_exprs):
                    extra.add(c.left)
            visit(e.right, extra)
            return
        if isinstance(e, A.Field):
            o = e.obj
            ok = isinstance(o, A.This) or any(o == f for f in frame_exprs) or o in known
            if not ok and isinstance(o, A.Name) and cls is None:
                ok = True
            if not ok:
                problems.append(f"cannot show {expr_str(o)} is in the reads frame")
        for k in A.children(e):
            if isinstance(k, A.Expr):
                visit(k, known)

    visit(body, frozenset())
    if reads_heap(body, cls) and cls is not None and not any(isinstance(f, A.This) for f in frame_exprs):
        problems.append("this is not in the reads frame")
    return (not problems, "; ".join(problems))


# ------------------------------------------------------------------ classification


def strengthened_names(mm: MergedModule) -> set:
    return {p.split(".")[-1] for p in mm.strengthened}


def mentions(formula, names: set) -> bool:
    if not names:
        return False
    for n in A.walk(formula):
        if isinstance(n, A.Apply):
            c = n.callee
            nm = c.name if isinstance(c, (A.Name, A.Field)) else None
            if nm in names:
                return True
    return False


def classify_inheritance(obligations: list, mm: MergedModule) -> list:
    """Set each obligation's status; Inherited only when nothing contributing to it changed in this step."""
    strong = strengthened_names(mm)
    for ob in obligations:
        ob.status = NEW if _is_new(ob, mm, strong) else INHERITED_STATUS
    return obligations


def _is_new(ob: Obligation, mm: MergedModule, strong: set) -> bool:
    origin = mm.member_origin.get(ob.member)
    if mm.base is None or origin in (EXTENDED, DEFINED):
        return True
    if ob.kind in INTRINSICALLY_NEW:
        return True
    if ob.kind in ESTABLISHING and mentions(ob.formula, strong):
        return True
    if ob.kind == "ReadsCheck":
        return ob.member in mm.strengthened
    if ob.kind == "FrameMethod":
        decl = mm.member(ob.member)
        return any(_changed(mm, n) for n in A.walk(decl.body) if isinstance(n, A.Stmt))
    if ob.kind == "InheritedEnsures":
        return False
    if ob.kind == "Termination":
        delta = mm.spec_delta.get(ob.member)
        if delta is not None and delta.decreases is not None:
            return True
        anchor = ob.anchor
        if isinstance(anchor, A.While) and id(anchor) in mm.new_decreases:
            return True
    if ob.kind in ("LoopInvInit", "LoopInvMaintain"):
        return _changed(mm, ob.anchor) or _changed(mm, ob.stmt)
    if ob.kind == "FrameModify":
        body = ob.anchor.body
        return _changed(mm, ob.anchor) or any(_changed(mm, n) for n in A.walk(body) if isinstance(n, A.Stmt))
    if ob.stmt is not None and _changed(mm, ob.stmt):
        return True
    return _changed(mm, ob.anchor) if isinstance(ob.anchor, (A.Stmt, A.Expr)) else False


def _changed(mm: MergedModule, node) -> bool:
    o = mm.origin(node)
    return o is not None and o.kind != INHERITED


def generate_obligations(mm: MergedModule, env: ProgramEnv, graph: Optional[CallGraph] = None) -> list:
    """All obligations of a merged module, classified and numbered per member."""
    graph = graph or CallGraph(env).build([mm.name])
    obs = Generator(env, mm, graph).run()
    classify_inheritance(obs, mm)
    counters: dict = {}
    for ob in obs:
        ob.index = counters.get(ob.member, 0)
        counters[ob.member] = ob.index + 1
    return obs

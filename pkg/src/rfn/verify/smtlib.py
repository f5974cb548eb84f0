"""SMT-LIB v2 scripts for proof obligations.

Each member body is executed symbolically along all paths. Locals become terms
over declared constants, loops are cut by havocking assigned locals and assuming
the invariants, and calls are replaced by fresh outputs constrained by the
callee's postcondition. A script asserts that some path reaching the obligation
violates it, so `unsat` means Valid. Heap state, sets, datatypes, and function
applications are outside the encoding and are reported as unsupported.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from ..env import ProgramEnv
from ..merge import MergedModule
from ..syntax import ast as A
from .engine import Bounds, havoc_window
from .obligations import Obligation


class UnsupportedConstruct(Exception):
    def __init__(self, what: str, node=None):
        super().__init__(what)
        self.what = what
        self.node = node


@dataclass(frozen=True)
class SeqTerm:
    arr: str
    length: str


@dataclass
class Path:
    pc: tuple = ()
    store: dict = field(default_factory=dict)

    def fork(self, cond: Optional[str] = None) -> "Path":
        return Path(self.pc + ((cond,) if cond is not None else ()), dict(self.store))


@dataclass
class Script:
    obligation: Obligation
    text: Optional[str]
    unsupported: Optional[str] = None

    @property
    def name(self) -> str:
        return self.obligation.smt_name()


BINOPS = {"+": "+", "-": "-", "*": "*", "/": "div", "%": "mod", "<": "<", "<=": "<=", ">": ">",
          ">=": ">=", "&&": "and", "||": "or", "==>": "=>", "<==>": "="}


def _and(terms) -> str:
    terms = [t for t in terms if t != "true"]
    if not terms:
        return "true"
    return terms[0] if len(terms) == 1 else f"(and {' '.join(terms)})"


def _or(terms) -> str:
    terms = [t for t in terms if t != "false"]
    if not terms:
        return "false"
    return terms[0] if len(terms) == 1 else f"(or {' '.join(terms)})"


def _int(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


class MemberEncoder:
    """Symbolic execution of one member, collecting violation conditions per obligation."""

    def __init__(self, env: ProgramEnv, mm: MergedModule, path: str, decl, cls, obligations: list,
                 bounds: Bounds, bounded: bool):
        self.env = env
        self.mm = mm
        self.mod = env.module(mm.name)
        self.path = path
        self.decl = decl
        self.cls = cls
        self.by_key = {ob.key: ob for ob in obligations}
        self.bounds = bounds
        self.bounded = bounded
        self.window = havoc_window(env, self.mod, decl, bounds)
        self.decls: list = []
        self.constraints: list = []
        self.names: dict = {}
        self.types: dict = {}
        self.goals: dict = {}  # key -> [violation term]
        self.failed: dict = {}  # key -> reason goal could not be encoded
        self.breaks: list = []
        self.entry: dict = {}

    # ------------------------------------------------------------ constants

    def fresh(self, base: str, rtype) -> object:
        k = self.names.get(base, 0)
        self.names[base] = k + 1
        name = base if k == 0 else f"{base}@{k}"
        kind = rtype[0] if rtype else "int"
        if kind == "int":
            self.decls.append(f"(declare-const {name} Int)")
            if self.bounded:
                self.constraints.append(self.in_window(name))
            return name
        if kind == "bool":
            self.decls.append(f"(declare-const {name} Bool)")
            return name
        if kind == "seq" and rtype[1] is not None and rtype[1][0] in ("int", "bool"):
            sort = "Int" if rtype[1][0] == "int" else "Bool"
            arr, ln = f"{name}.elems", f"{name}.len"
            self.decls.append(f"(declare-const {arr} (Array Int {sort}))")
            self.decls.append(f"(declare-const {ln} Int)")
            self.constraints.append(f"(>= {ln} 0)")
            if self.bounded:
                self.constraints.append(f"(<= {ln} {self.bounds.seq_length})")
                if sort == "Int":
                    self.constraints.append(
                        f"(forall ((i Int)) (=> (and (<= 0 i) (< i {ln})) {self.in_window(f'(select {arr} i)')}))")
            return SeqTerm(arr, ln)
        raise UnsupportedConstruct(f"values of type {_type_text(rtype)}")

    def in_window(self, term: str) -> str:
        lo, hi = self.bounds.int_low, self.bounds.int_high
        extra = [v for v in self.window if v < lo or v > hi]
        parts = [f"(and (<= {_int(lo)} {term}) (<= {term} {_int(hi)}))"] + [f"(= {term} {_int(v)})" for v in extra]
        return _or(parts)

    def rtype(self, t):
        return self.env.resolve_type(self.mod, t)

    # ------------------------------------------------------------ expressions

    def expr(self, e, p: Path, guards=(), entry=None):
        """Term for `e`; well-formedness goals met on the way are recorded under `guards`."""
        store = entry if entry is not None else p.store
        if isinstance(e, A.IntLit):
            return _int(e.value)
        if isinstance(e, A.BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, A.Name):
            if e.name in store:
                return store[e.name]
            raise UnsupportedConstruct(f"reference to {e.name}", e)
        if isinstance(e, A.Unary):
            v = self.expr(e.operand, p, guards, entry)
            return f"(not {v})" if e.op == "!" else f"(- {v})"
        if isinstance(e, A.Binary):
            return self.binary(e, p, guards, entry)
        if isinstance(e, A.Chain):
            vals = [self.expr(x, p, guards, entry) for x in e.operands]
            parts = [self.compare(op, vals[i], vals[i + 1], e) for i, op in enumerate(e.ops)]
            return _and(parts)
        if isinstance(e, A.Ite):
            c = self.expr(e.cond, p, guards, entry)
            t = self.expr(e.then, p, guards + (c,), entry)
            f = self.expr(e.else_, p, guards + (f"(not {c})",), entry)
            return f"(ite {c} {t} {f})"
        if isinstance(e, A.Length):
            s = self.expr(e.operand, p, guards, entry)
            if not isinstance(s, SeqTerm):
                raise UnsupportedConstruct("length of a non-sequence", e)
            return s.length
        if isinstance(e, A.Index):
            s = self.expr(e.seq, p, guards, entry)
            i = self.expr(e.index, p, guards, entry)
            if not isinstance(s, SeqTerm):
                raise UnsupportedConstruct("indexing a non-sequence", e)
            self.wf_goal(e, p, guards, f"(and (<= 0 {i}) (< {i} {s.length}))")
            return f"(select {s.arr} {i})"
        if isinstance(e, A.Old):
            return self.expr(e.operand, p, guards, self.entry)
        raise UnsupportedConstruct(type(e).__name__.lower() + " expressions", e)

    def binary(self, e: A.Binary, p, guards, entry):
        if e.op in ("&&", "||", "==>"):
            a = self.expr(e.left, p, guards, entry)
            g = a if e.op != "||" else f"(not {a})"
            b = self.expr(e.right, p, guards + (g,), entry)
            return f"({BINOPS[e.op]} {a} {b})"
        a = self.expr(e.left, p, guards, entry)
        b = self.expr(e.right, p, guards, entry)
        if isinstance(a, SeqTerm) or isinstance(b, SeqTerm):
            raise UnsupportedConstruct("sequence operators", e)
        if e.op in ("/", "%"):
            self.wf_goal(e, p, guards, f"(not (= {b} 0))")
        return self.compare(e.op, a, b, e)

    def compare(self, op, a, b, node):
        if op == "==":
            return f"(= {a} {b})"
        if op in ("!=", "≠"):
            return f"(not (= {a} {b}))"
        if op in BINOPS:
            return f"({BINOPS[op]} {a} {b})"
        raise UnsupportedConstruct(f"operator {op}", node)

    def wf_goal(self, node, p: Path, guards, ok: str):
        key = ("WellFormed", id(node))
        if key in self.by_key:
            self.goals.setdefault(key, []).append(_and(list(p.pc) + list(guards) + [f"(not {ok})"]))

    def goal(self, slot: str, anchor, p: Path, formula, store=None):
        key = (slot, id(anchor))
        if key not in self.by_key:
            return
        try:
            q = Path(p.pc, store if store is not None else p.store)
            t = self.expr(formula, q)
        except UnsupportedConstruct as u:
            self.failed.setdefault(key, u.what)
            return
        self.goals.setdefault(key, []).append(_and(list(p.pc) + [f"(not {t})"]))

    def assume(self, e, p: Path) -> Path:
        return p.fork(self.expr(e, p))

    # ------------------------------------------------------------ statements

    def run(self):
        p = Path()
        for prm in self.decl.params:
            t = self.rtype(prm.type)
            self.types[prm.name] = t
            p.store[prm.name] = self.fresh(prm.name, t)
        for prm in getattr(self.decl, "outs", ()):
            t = self.rtype(prm.type)
            self.types[prm.name] = t
            p.store[prm.name] = self.fresh(prm.name, t)
        self.entry = dict(p.store)
        if self.measure_exprs:
            self.measure = [self.expr(e, p) for e in self.measure_exprs]
        for r in A.requires_of(self.decl):
            p = self.assume(r, p)
        if isinstance(self.decl, A.FunctionDecl):
            raise UnsupportedConstruct("function bodies")
        self.returns: list = []
        done = self.exec(self.decl.body, [p])
        exits = [(q, None) for q in done] + self.returns
        post = A.conjoin(A.ensures_of(self.decl))
        for q, ret in exits:
            if ret is not None and ("ReturnPost", id(ret)) in self.by_key:
                self.goal("ReturnPost", ret, q, post)
                continue
            for clause in A.specs_of(self.decl, A.Ensures):
                self.goal("Ensures", clause, q, clause.expr)

    def exec(self, s, paths: list) -> list:
        if not paths:
            return []
        out = getattr(self, "s_" + type(s).__name__)(s, paths)
        base = self.mm.tightened.get(id(s))
        if base is not None:
            cond = base.init.cond if isinstance(base, A.VarDecl) else base.cond
            for p in out:
                self.goal("TightenUp", s, p, cond)
        return out

    def s_Block(self, s, paths):
        for x in s.stmts:
            paths = self.exec(x, paths)
        return paths

    def s_Labeled(self, s, paths):
        return self.exec(s.stmt, paths)

    def s_VarDecl(self, s, paths):
        out = []
        for p in paths:
            p = p.fork()
            for n, t in zip(s.names, s.types):
                if t is not None:
                    self.types[n] = self.rtype(t)
                    if s.init is None:
                        p.store[n] = self.fresh(n, self.types[n])
            out.append(p)
        if s.init is None:
            return out
        if isinstance(s.init, A.Assign):
            for n, r in zip(s.names, s.init.rhs):
                if n not in self.types:
                    self.types[n] = self.static_type(r)
        elif isinstance(s.init, A.AssignSuchThat):
            for n in s.names:
                self.types.setdefault(n, ("int",))
        return self.exec(s.init, out)

    def static_type(self, r):
        if isinstance(r, (A.BoolLit, A.Chain)) or (isinstance(r, A.Unary) and r.op == "!"):
            return ("bool",)
        if isinstance(r, A.Binary) and r.op in ("&&", "||", "==>", "<==>", "==", "!=", "≠", "<", "<=", ">", ">="):
            return ("bool",)
        if isinstance(r, A.Name) and r.name in self.types:
            return self.types[r.name]
        if isinstance(r, A.Ite):
            return self.static_type(r.then)
        if isinstance(r, A.Apply):
            c = self.callee(r)
            if c is not None and c.outs:
                return self.env.resolve_type(self.mod, c.outs[0].type)
        return ("int",)

    def local(self, lhs) -> str:
        if isinstance(lhs, A.Name) and lhs.name in self.types:
            return lhs.name
        raise UnsupportedConstruct("assignment to heap locations", lhs)

    def callee(self, r: A.Apply):
        if isinstance(r.callee, A.Name):
            if self.cls is not None and r.callee.name in self.cls.members:
                raise UnsupportedConstruct("calls on objects", r)
            return self.mod.members.get(r.callee.name)
        raise UnsupportedConstruct("qualified or receiver calls", r)

    def s_Assign(self, s, paths):
        if len(s.rhs) == 1 and isinstance(s.rhs[0], A.Apply):
            d = self.callee(s.rhs[0])
            if isinstance(d, A.MethodDecl):
                return self.call(s.rhs[0], d, s.rhs[0].args, s.lhs, paths)
        names = [self.local(x) for x in s.lhs]
        out = []
        for p in paths:
            vals = [self.expr(r, p) for r in s.rhs]
            q = p.fork()
            for n, v in zip(names, vals):
                q.store[n] = v
            out.append(q)
        return out

    def s_Call(self, s, paths):
        if not isinstance(s.callee, A.Name):
            raise UnsupportedConstruct("qualified or receiver calls", s)
        d = self.mod.members.get(s.callee.name)
        if not isinstance(d, A.MethodDecl):
            raise UnsupportedConstruct("calls to unknown members", s)
        return self.call(s, d, s.args, s.lhs, paths)

    def call(self, node, d: A.MethodDecl, args, lhs, paths):
        if A.frame_of(d):
            raise UnsupportedConstruct("calls with a modifies clause", node)
        names = [self.local(x) for x in lhs]
        out = []
        for p in paths:
            vals = [self.expr(a, p) for a in args]
            callee_entry = {prm.name: v for prm, v in zip(d.params, vals)}
            sub = dict(callee_entry)
            if A.requires_of(d):
                self.goal("CallPre", node, p, A.conjoin(A.requires_of(d)), sub)
                for r in A.requires_of(d):
                    q = Path(p.pc, sub)
                    p = p.fork(self.expr(r, q))
            term = self.by_key.get(("Termination", id(node)))
            if term is not None and self.measure is not None:
                new = [self.expr(e, Path(p.pc, sub)) for e in term.measure_new]
                self.goals.setdefault(term.key, []).append(
                    _and(list(p.pc) + [f"(not {lex_term(new, self.measure, term.measure_new, self)})"]))
            if ("DivergenceCall", id(node)) in self.by_key:
                self.goals.setdefault(("DivergenceCall", id(node)), []).append(_and(list(p.pc)))
                continue
            ints = [v for v in vals if isinstance(v, str)]
            for prm in d.outs:
                t = self.env.resolve_type(self.mod, prm.type)
                sub[prm.name] = self.fresh(f"{prm.name}.{node.loc.line}", t)
                if self.bounded and t[0] == "int" and ints:
                    self.constraints[-1] = _or([self.constraints[-1]] + [f"(= {sub[prm.name]} {v})" for v in ints])
            old_entry = self.entry
            self.entry = callee_entry
            q = p.fork()
            try:
                for e in A.ensures_of(d):
                    q = q.fork(self.expr(e, Path(q.pc, sub)))
            finally:
                self.entry = old_entry
            for n, prm in zip(names, d.outs):
                q.store[n] = sub[prm.name]
            out.append(q)
        return out

    measure = None
    measure_exprs = None

    def s_AssignSuchThat(self, s, paths):
        names = [self.local(x) for x in s.lhs]
        out = []
        for p in paths:
            q = p.fork()
            for n in names:
                q.store[n] = self.fresh(n, self.types.get(n, ("int",)))
            out.append(self.assume(s.cond, q))
        return out

    def s_If(self, s, paths):
        out = []
        for p in paths:
            if isinstance(s.guard, A.Star):
                t, f = p.fork(), p.fork()
            else:
                g = self.expr(s.guard, p)
                t, f = p.fork(g), p.fork(f"(not {g})")
            out.extend(self.exec(s.then, [t]))
            out.extend(self.exec(s.else_, [f]) if s.else_ is not None else [f])
        return out

    def s_While(self, s, paths):
        assigned = sorted({x.name for n in A.walk(s.body)
                           for x in getattr(n, "lhs", ()) if isinstance(x, A.Name) and x.name in self.types})
        for n in A.walk(s.body):
            if isinstance(n, (A.New, A.Modify, A.Call)) or (
                    isinstance(n, (A.Assign, A.AssignSuchThat)) and any(not isinstance(x, A.Name) for x in n.lhs)):
                raise UnsupportedConstruct("loops that write the heap", s)
        out = []
        for p in paths:
            for inv in s.invariants:
                self.goal("LoopInvInit", inv, p, inv)
                p = self.assume(inv, p)
            q = p.fork()
            for n in assigned:
                q.store[n] = self.fresh(f"{n}.loop{s.loc.line}", self.types[n])
            for inv in s.invariants:
                q = self.assume(inv, q)
            if isinstance(s.guard, A.Star):
                ex, it = q.fork(), q.fork()
            else:
                g = self.expr(s.guard, q)
                ex, it = q.fork(f"(not {g})"), q.fork(g)
            before = [self.expr(e, it) for e in s.decreases]
            saved, self.breaks = self.breaks, []
            ends = self.exec(s.body, [it])
            out.extend(self.breaks)
            self.breaks = saved
            for e in ends:
                for inv in s.invariants:
                    self.goal("LoopInvMaintain", inv, e, inv)
                if s.decreases and ("Termination", id(s)) in self.by_key:
                    after = [self.expr(x, e) for x in s.decreases]
                    self.goals.setdefault(("Termination", id(s)), []).append(
                        _and(list(e.pc) + [f"(not {lex_term(after, before, s.decreases, self)})"]))
            out.append(ex)
        return out

    def s_Assert(self, s, paths):
        slot = "AssumeToAssert" if id(s) in self.mm.assume_to_assert else "Assert"
        out = []
        for p in paths:
            self.goal(slot, s, p, s.cond)
            out.append(self.assume(s.cond, p))
        return out

    def s_Assume(self, s, paths):
        return [self.assume(s.cond, p) for p in paths]

    def s_Return(self, s, paths):
        for p in paths:
            q = p.fork()
            for prm, e in zip(self.decl.outs, s.values):
                q.store[prm.name] = self.expr(e, p)
            self.returns.append((q, s))
        return []

    def s_Break(self, s, paths):
        self.breaks.extend(paths)
        return []

    def s_New(self, s, paths):
        raise UnsupportedConstruct("object allocation", s)

    def s_Modify(self, s, paths):
        raise UnsupportedConstruct("modify statements", s)


def lex_term(new, old, exprs, enc) -> str:
    """`new` strictly below `old`: integer components bounded below by 0, false < true."""
    disj = []
    for i in range(min(len(new), len(old))):
        eqs = [f"(= {new[j]} {old[j]})" for j in range(i)]
        boolean = enc.static_type(exprs[i]) == ("bool",)
        less = f"(and (not {new[i]}) {old[i]})" if boolean else f"(and (< {new[i]} {old[i]}) (>= {old[i]} 0))"
        disj.append(_and(eqs + [less]))
    if len(new) > len(old):
        disj.append(_and([f"(= {new[j]} {old[j]})" for j in range(len(old))]))
    return _or(disj)


def _type_text(t) -> str:
    if t is None:
        return "?"
    if t[0] == "class":
        return t[1].name
    if t[0] in ("set", "seq"):
        return f"{t[0]}<{_type_text(t[1])}>"
    if t[0] == "datatype":
        return t[2].name
    return t[-1] if isinstance(t[-1], str) else t[0]


def emit_smtlib(env: ProgramEnv, mm: MergedModule, obligations: list, bounds: Bounds = Bounds(),
                bounded: bool = True, include_inherited: bool = False) -> list:
    """One Script per obligation; unsupported ones carry the reason and no text."""
    from .obligations import CallGraph, measure

    graph = CallGraph(env).build([mm.name])
    mod = env.module(mm.name)
    scripts = []
    for path, decl, cls_decl in mm.members():
        obs = [o for o in obligations if o.member == path and (include_inherited or o.status == "New")]
        if not obs:
            continue
        cls = mod.classes.get(cls_decl.name) if cls_decl is not None else None
        enc = MemberEncoder(env, mm, path, decl, cls, obs, bounds, bounded)
        member_reason = None
        try:
            if cls is not None:
                raise UnsupportedConstruct("class members")
            if isinstance(decl, A.MethodDecl):
                enc.measure_exprs = measure(decl, graph.recursive((mm.name, path)))
            enc.run()
        except UnsupportedConstruct as u:
            member_reason = u.what
        for ob in obs:
            if ob.static_verdict is not None:
                scripts.append(Script(ob, None, "statically decided obligation"))
            elif ob.kind == "SuchThatFeasible":
                scripts.append(Script(ob, None, "existential feasibility"))
            elif member_reason is not None:
                scripts.append(Script(ob, None, member_reason))
            elif ob.key in enc.failed:
                scripts.append(Script(ob, None, enc.failed[ob.key]))
            else:
                scripts.append(Script(ob, render_script(ob, enc, enc.goals.get(ob.key, []))))
    return scripts


def render_script(ob: Obligation, enc: MemberEncoder, violations: list) -> str:
    lines = [
        f"; obligation {ob.index} of {ob.origin}: {ob.kind} ({ob.status})",
        f"; at {ob.loc}: {ob.formula_text()}",
        "; sat means the obligation is violated on some path" + (" within the enumeration bounds" if enc.bounded else ""),
        "(set-logic ALL)",
    ]
    lines.extend(enc.decls)
    lines.extend(f"(assert {c})" for c in enc.constraints)
    lines.append(f"(assert {_or(violations)})")
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


def write_scripts(scripts: list, out_dir: str) -> list:
    """Write supported scripts; returns the unsupported ones."""
    os.makedirs(out_dir, exist_ok=True)
    skipped = []
    for s in scripts:
        if s.text is None:
            skipped.append(s)
            continue
        with open(os.path.join(out_dir, s.name), "w", encoding="utf-8") as f:
            f.write(s.text)
    return skipped

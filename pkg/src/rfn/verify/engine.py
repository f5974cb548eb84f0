"""Bounded enumerative checking of proof obligations.

Each member is explored by stateless depth-first search over choice points.
Inputs, pre-state fields, and havocked values are chosen lazily when first read,
so only the parts of the state a path actually touches are enumerated. A run is
replayed from the prefix of choices that led to it; exhausting all prefixes
covers every state within the bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from ..env import INT_T, ClassInfo, ProgramEnv
from ..semantics import (
    BreakSignal, DVal, Frame, IllFormed, OVal, Prune, Ref, ReturnSignal, Semantics, Snapshot, Target,
    render_value,
)
from ..syntax import ast as A
from ..syntax.printer import expr_str
from .obligations import Obligation
from .termination import lex_less


@dataclass(frozen=True)
class Bounds:
    int_low: int = -3
    int_high: int = 3
    max_objects: int = 3
    datatype_depth: int = 2
    seq_length: int = 3
    opaque_values: int = 2
    max_runs: int = 200_000

    def __post_init__(self):
        if not (self.int_low <= 0 <= self.int_high):
            raise ValueError("integer bounds must include 0")
        if self.max_objects < 1 or self.datatype_depth < 1 or self.seq_length < 0:
            raise ValueError("bounds must be positive")


class Unknown:
    """A value not chosen yet; resolved on first read and then fixed for the run."""

    __slots__ = ("key", "rtype", "epoch", "extra", "label")

    def __init__(self, key, rtype, epoch: int, extra=(), label: str = ""):
        self.key = key
        self.rtype = rtype
        self.epoch = epoch
        self.extra = tuple(extra)
        self.label = label


class LazySet:
    """A set whose membership is decided per element on demand until it is closed."""

    __slots__ = ("key", "elem", "epoch", "label")

    def __init__(self, key, elem, epoch: int, label: str):
        self.key = key
        self.elem = elem
        self.epoch = epoch
        self.label = label


class LazySeq:
    __slots__ = ("key", "elem", "label")

    def __init__(self, key, elem, label: str):
        self.key = key
        self.elem = elem
        self.label = label


@dataclass
class Counterexample:
    obligation: str
    message: str
    inputs: dict
    pre_heap: dict
    choices: list
    prefix: list
    replayed: bool = False

    def render(self) -> str:
        lines = [f"counterexample for {self.obligation}: {self.message}"]
        if self.inputs:
            lines.append("  inputs: " + ", ".join(f"{k} = {v}" for k, v in self.inputs.items()))
        for obj, fields in self.pre_heap.items():
            if fields:
                lines.append(f"  pre-state {obj}: " + ", ".join(f"{k} = {v}" for k, v in fields.items()))
            else:
                lines.append(f"  pre-state {obj}")
        for c in self.choices:
            lines.append(f"  choice: {c}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"message": self.message, "inputs": self.inputs, "pre_heap": self.pre_heap,
                "choices": self.choices, "replayed": self.replayed}


class Failure(Exception):
    pass


def _render_type(t) -> str:
    if t is None:
        return "?"
    if t[0] == "class":
        return t[1].name
    if t[0] in ("set", "seq"):
        return f"{t[0]}<{_render_type(t[1])}>"
    if t[0] in ("datatype",):
        return t[2].name
    if t[0] == "opaque":
        return t[2]
    return t[0]


class Machine(Semantics):
    """One run: executes a member, resolving choices from a replay prefix, then defaulting to the first option."""

    def __init__(self, check: "MemberCheck", prefix: list):
        super().__init__(check.env)
        self.check_ctx = check
        self.bounds = check.bounds
        self.prefix = prefix
        self.trace: list = []  # (index, options, label)
        self.resolved: dict = {}
        self.sets: dict = {}  # key -> {"mem": {}, "closed": frozenset|None}
        self.seqs: dict = {}  # key -> {"len": int|None, "elems": {}}
        self.uninterp: dict = {}
        self.live_snaps: list = []
        self.failures: dict = {}
        self.next_key = 0
        self.inputs: dict = {}  # display name -> token/value
        self.pre_tokens: dict = {}  # oid -> {field: token}
        self.suppress = 0

    # ----------------------------------------------------------- choices

    def choose(self, n: int, label: str) -> int:
        if n <= 0:
            raise Prune()
        pos = len(self.trace)
        idx = self.prefix[pos] if pos < len(self.prefix) else 0
        if idx >= n:
            raise Prune()
        self.trace.append([idx, n, label])
        return idx

    def note(self, text: str):
        if self.trace:
            self.trace[-1][2] = text

    def fresh_key(self):
        self.next_key += 1
        return self.next_key

    def token(self, rtype, epoch: int, label: str, extra=()):
        if rtype is not None and rtype[0] == "set":
            return LazySet(self.fresh_key(), rtype[1], epoch, label)
        if rtype is not None and rtype[0] == "seq":
            return LazySeq(self.fresh_key(), rtype[1], label)
        return Unknown(self.fresh_key(), rtype, epoch, extra, label)

    def resolve(self, v):
        if isinstance(v, Unknown):
            if v.key in self.resolved:
                return self.resolved[v.key]
            options = self.domain(v.rtype, v.epoch, v.extra)
            i = self.choose(len(options), v.label)
            val = options[i]
            if isinstance(val, _NewObject):
                val = self.materialize(val.cls)
            self.resolved[v.key] = val
            self.note(f"{v.label} = {render_value(val)}")
            return val
        return v

    def domain(self, rtype, epoch: int, extra=()) -> list:
        b = self.bounds
        kind = rtype[0] if rtype else "int"
        if kind == "int":
            return sorted(set(self.check_ctx.window) | set(x for x in extra if isinstance(x, int)))
        if kind == "bool":
            return [False, True]
        if kind == "class":
            cls = rtype[1]
            existing = [Ref(o.oid) for o in self.objects.values()
                        if o.cls is cls and (o.pre or o.epoch <= epoch)]
            out = [None] + existing
            if sum(1 for o in self.objects.values() if o.cls is cls and o.pre) < b.max_objects:
                out.append(_NewObject(cls))
            return out
        if kind == "object":
            return [None] + [Ref(o.oid) for o in self.objects.values() if o.pre or o.epoch <= epoch]
        if kind == "datatype":
            return self.check_ctx.datatype_values(rtype)
        if kind == "opaque":
            return [OVal(rtype[2], i) for i in range(b.opaque_values)]
        if kind == "set":
            return [self.token(rtype, epoch, "set")]
        if kind == "seq":
            return [self.token(rtype, epoch, "seq")]
        return [None]

    def materialize(self, cls: ClassInfo) -> Ref:
        """Bring a pre-state object into existence with unknown field values."""
        ref = self.allocate(cls, pre=True)
        self.clock -= 1  # pre-state objects do not advance the allocation clock
        o = self.objects[ref.oid]
        toks = {}
        for name in cls.fields:
            toks[name] = self.token(self.field_type(cls, name), -1, f"{ref!r}.{name}")
        o.fields.update(toks)
        self.pre_tokens[ref.oid] = dict(toks)
        for snap in self.live_snaps:
            snap.fields[ref.oid] = dict(toks)
        return ref

    def initial_field(self, cls: ClassInfo, name: str):
        return default_value(self.field_type(cls, name))

    # ----------------------------------------------------------- lazy collections

    def is_set(self, v) -> bool:
        return isinstance(v, (frozenset, LazySet))

    def as_set(self, v) -> frozenset:
        v = self.resolve(v)
        if isinstance(v, LazySet):
            return self.close(v)
        return super().as_set(v)

    def close(self, s: LazySet) -> frozenset:
        st = self.sets.setdefault(s.key, {"mem": {}, "closed": None})
        if st["closed"] is not None:
            return st["closed"]
        for cand in self.candidates(s):
            self.member(s, cand)
        st["closed"] = frozenset(x for x, m in st["mem"].items() if m)
        return st["closed"]

    def candidates(self, s: LazySet) -> list:
        kind = s.elem[0] if s.elem else "object"
        if kind in ("class", "object"):
            out = [None]
            for o in self.objects.values():
                if self.compatible(s, Ref(o.oid)):
                    out.append(Ref(o.oid))
            return out
        return []

    def compatible(self, s: LazySet, x) -> bool:
        kind = s.elem[0] if s.elem else "object"
        if kind in ("class", "object"):
            if x is None:
                return True
            if not isinstance(x, Ref):
                return False
            o = self.objects[x.oid]
            if kind == "class" and o.cls is not s.elem[1]:
                return False
            return o.pre or o.epoch <= s.epoch
        if kind == "int":
            return isinstance(x, int) and not isinstance(x, bool)
        if kind == "bool":
            return isinstance(x, bool)
        return True

    def member(self, s: LazySet, x) -> bool:
        st = self.sets.setdefault(s.key, {"mem": {}, "closed": None})
        if st["closed"] is not None:
            return x in st["closed"]
        if x in st["mem"]:
            return st["mem"][x]
        if not self.compatible(s, x):
            return False
        i = self.choose(2, "")
        st["mem"][x] = bool(i)
        self.note(f"{render_value(x)} {'in' if i else '!in'} {s.label}")
        return bool(i)

    def contains(self, coll, x) -> bool:
        coll = self.resolve(coll)
        if isinstance(coll, LazySet):
            return self.member(coll, self.hashable(x))
        if isinstance(coll, LazySeq):
            coll = self.force_seq(coll)
        return super().contains(coll, x)

    def seq_state(self, s: LazySeq):
        return self.seqs.setdefault(s.key, {"len": None, "elems": {}})

    def seq_len(self, s) -> int:
        s = self.resolve(s)
        if isinstance(s, LazySeq):
            st = self.seq_state(s)
            if st["len"] is None:
                st["len"] = self.choose(self.bounds.seq_length + 1, "")
                self.note(f"|{s.label}| = {st['len']}")
            return st["len"]
        return super().seq_len(s)

    def seq_index(self, s, i: int):
        s = self.resolve(s)
        if isinstance(s, LazySeq):
            st = self.seq_state(s)
            if i not in st["elems"]:
                st["elems"][i] = self.token(s.elem, -1, f"{s.label}[{i}]")
            return self.resolve(st["elems"][i])
        return super().seq_index(s, i)

    def force_seq(self, s: LazySeq) -> tuple:
        n = self.seq_len(s)
        return tuple(self.seq_index(s, i) for i in range(n))

    def as_seq(self, v) -> tuple:
        v = self.resolve(v)
        if isinstance(v, LazySeq):
            return self.force_seq(v)
        return super().as_seq(v)

    def hashable(self, v):
        v = self.resolve(v)
        if isinstance(v, LazySet):
            return self.close(v)
        if isinstance(v, LazySeq):
            return self.force_seq(v)
        return super().hashable(v)

    # ----------------------------------------------------------- obligations

    def active(self, slot: str, anchor) -> Optional[Obligation]:
        ob = self.check_ctx.by_key.get((slot, id(anchor)))
        return ob

    def record(self, ob: Optional[Obligation], message: str):
        if ob is not None and ob.key in self.check_ctx.active and ob.key not in self.failures:
            self.failures[ob.key] = message

    def ensure(self, slot: str, anchor, ok: bool, message: str):
        """Check-then-assume: a failing condition is recorded (if checked) and ends the path."""
        if not ok:
            self.record(self.active(slot, anchor), message)
            raise Prune()

    def holds(self, e, fr: Frame):
        """(ok, message) for a formula, counting ill-formedness as failure."""
        try:
            return self.truth(e, fr), f"{expr_str(e)} does not hold"
        except IllFormed as err:
            return False, f"{expr_str(e)} is not well-formed: {err.message}"

    def check_expr(self, slot: str, anchor, e, fr: Frame, message: str = ""):
        ok, why = self.holds(e, fr)
        self.ensure(slot, anchor, ok, message or why)

    def assume(self, e, fr: Frame):
        try:
            ok = self.truth(e, fr)
        except IllFormed:
            raise Prune()
        if not ok:
            raise Prune()

    def wf(self, ok: bool, node, message: str, fr: Frame):
        if ok:
            return
        ob = self.active("WellFormed", node)
        if ob is None or self.suppress:
            raise IllFormed(node, message)
        self.record(ob, message)
        raise Prune()

    def depth_exceeded(self, node):
        return Prune()

    # ----------------------------------------------------------- uninterpreted functions

    def apply_uninterpreted(self, t: Target, args: list, node, fr: Frame):
        version = ("old", id(fr.old)) if fr.in_old else self.heap_version
        key = (t.qualified, t.receiver, tuple(self.hashable(a) for a in args), version)
        if key in self.uninterp:
            return self.uninterp[key]
        rtype = self.env.resolve_type(t.module, t.decl.result)
        options = self.domain(rtype, self.clock)
        i = self.choose(len(options), "")
        val = options[i]
        if isinstance(val, _NewObject):
            val = self.materialize(val.cls)
        self.uninterp[key] = val
        recv = f"{t.receiver!r}." if t.receiver is not None else ""
        argtext = ", ".join(render_value(self.hashable(a)) for a in args)
        self.note(f"{recv}{t.decl.name}({argtext}) = {render_value(val)}")
        return val

    # ----------------------------------------------------------- frames and writes

    def on_write(self, ref: Ref, node, fr: Frame):
        o = self.objects[ref.oid]
        if fr.mod_set is not None:
            allowed = ref in fr.mod_set or (not o.pre and o.epoch > fr.entry_clock)
            if not allowed:
                self.record(self.active("FrameMethod", fr.member),
                            f"{ref!r} is written but is not in the modifies frame and was not allocated by the call")
                raise Prune()
        for m, frame, clock in fr.modify_stack:
            if not (ref in frame or (not o.pre and o.epoch > clock)):
                self.record(self.active("FrameModify", m), f"{ref!r} is written outside the modify frame")
                raise Prune()

    def havoc_object(self, ref: Ref, why: str):
        o = self.objects[ref.oid]
        for name in o.cls.fields:
            o.fields[name] = self.token(self.field_type(o.cls, name), self.clock, f"{ref!r}.{name} after {why}")
        self.heap_version += 1

    def snapshot(self) -> Snapshot:
        snap = super().snapshot()
        self.live_snaps.append(snap)
        return snap

    def release(self, snap: Snapshot):
        if snap in self.live_snaps:
            self.live_snaps.remove(snap)

    # ----------------------------------------------------------- statements

    def exec(self, s, fr: Frame):
        super().exec(s, fr)
        base = self.check_ctx.tightened.get(id(s))
        if base is not None:
            cond = base.init.cond if isinstance(base, A.VarDecl) else base.cond
            self.check_expr("TightenUp", s, cond, fr)

    def default_local(self, t, fr):
        rtype = self.env.resolve_type(fr.module, t) if t is not None else INT_T
        return self.token(rtype, self.clock, "uninitialized local")

    def choose_guard(self, node) -> bool:
        i = self.choose(2, "")
        self.note(f"if * at line {node.loc.line}: {'then' if i == 0 else 'else'}")
        return i == 0

    def exec_assert(self, s: A.Assert, fr: Frame):
        slot = "AssumeToAssert" if id(s) in self.check_ctx.mm.assume_to_assert else "Assert"
        self.check_expr(slot, s, s.cond, fr)

    def exec_assume(self, s: A.Assume, fr: Frame):
        self.assume(s.cond, fr)

    def exec_such_that(self, s: A.AssignSuchThat, fr: Frame):
        targets = []
        for lhs in s.lhs:
            if isinstance(lhs, A.Name) and lhs.name in fr.locals:
                targets.append(("local", lhs.name))
            else:
                t = self.lvalue(lhs, fr)
                self.deref(t[1], t[3], fr)
                targets.append(t)
        domains = [self.such_that_domain(t, s, fr) for t in targets]
        saved = [self.read_target(t, fr) for t in targets]
        sat = []
        self.suppress += 1
        try:
            for combo in itertools.product(*domains):
                for t, v in zip(targets, combo):
                    self.poke(t, v, fr)
                try:
                    if self.truth(s.cond, fr):
                        sat.append(combo)
                except IllFormed:
                    pass
        finally:
            self.suppress -= 1
            for t, v in zip(targets, saved):
                self.poke(t, v, fr)
        if not s.assume:
            self.ensure("SuchThatFeasible", s, bool(sat), f"no value satisfies {expr_str(s.cond)} within bounds")
        if not sat:
            raise Prune()
        i = self.choose(len(sat), "")
        names = ", ".join(expr_str(x) for x in s.lhs)
        self.note(f"{names} :| chosen {', '.join(render_value(v) for v in sat[i])}")
        for t, v in zip(targets, sat[i]):
            self.store(t, v, s, fr)

    def read_target(self, t, fr):
        if t[0] == "local":
            return fr.locals.get(t[1])
        return self.objects[t[1].oid].fields[t[2]]

    def poke(self, t, v, fr):
        if t[0] == "local":
            fr.locals[t[1]] = v
        else:
            self.objects[t[1].oid].fields[t[2]] = v

    def such_that_domain(self, t, s, fr) -> list:
        if t[0] == "local":
            rtype = fr.types.get(t[1]) or INT_T
        else:
            o = self.objects[t[1].oid]
            rtype = self.field_type(o.cls, t[2])
        kind = rtype[0]
        if kind == "int":
            return sorted(set(self.check_ctx.window) | self.context_ints(s.cond, s.lhs, fr))
        if kind == "set":
            elems = [None] + [Ref(o.oid) for o in self.objects.values()
                              if rtype[1][0] == "object" or (rtype[1][0] == "class" and o.cls is rtype[1][1])]
            if rtype[1][0] not in ("class", "object"):
                elems = sorted(self.context_ints(s.cond, s.lhs, fr))
            subsets = []
            for r in range(len(elems) + 1):
                subsets.extend(frozenset(c) for c in itertools.combinations(elems, r))
            return subsets
        return self.domain(rtype, self.clock)

    def context_ints(self, cond, lhs, fr) -> set:
        """Integer values, each +-1, of the subexpressions of `cond` that do not mention the assigned names."""
        names = {x.name for x in lhs if isinstance(x, A.Name)}
        out = set()
        for n in A.walk(cond):
            if not isinstance(n, A.Expr) or isinstance(n, (A.IntLit, A.BoolLit)):
                continue
            if any(isinstance(m, A.Name) and m.name in names for m in A.walk(n)):
                continue
            try:
                self.suppress += 1
                v = self.resolve(self.eval(n, fr))
            except (IllFormed, Prune):
                continue
            finally:
                self.suppress -= 1
            if isinstance(v, int) and not isinstance(v, bool):
                out.update((v - 1, v, v + 1))
        return out

    def exec_modify(self, s: A.Modify, fr: Frame):
        frame = self.frame_objects(s.frame, fr)
        if s.body is None:
            for ref in sorted(frame):
                self.on_write(ref, s, fr)
            for ref in sorted(frame):
                self.havoc_object(ref, f"modify at line {s.loc.line}")
            return
        fr.modify_stack.append((s, frame, self.clock))
        try:
            self.exec(s.body, fr)
        finally:
            fr.modify_stack.pop()

    def exec_while(self, s: A.While, fr: Frame):
        for inv in s.invariants:
            self.check_expr("LoopInvInit", inv, inv, fr)
        names, heap = self.check_ctx.loop_targets(s, fr)
        for n in names:
            fr.locals[n] = self.token(fr.types.get(n) or INT_T, self.clock, f"{n} in loop at line {s.loc.line}")
        if heap:
            for o in list(self.objects.values()):
                ref = Ref(o.oid)
                if fr.mod_set is None or ref in fr.mod_set or (not o.pre and o.epoch > fr.entry_clock):
                    self.havoc_object(ref, f"loop at line {s.loc.line}")
        for inv in s.invariants:
            self.assume(inv, fr)
        i = self.choose(2, "")
        self.note(f"loop at line {s.loc.line}: {'exit' if i == 0 else 'arbitrary iteration'}")
        if i == 0:
            if isinstance(s.guard, A.Expr):
                self.assume(A.Unary("!", s.guard), fr)
            return
        if isinstance(s.guard, A.Expr):
            self.assume(s.guard, fr)
        before = tuple(self.resolve(self.eval(e, fr)) for e in s.decreases) if s.decreases else None
        try:
            self.exec(s.body, fr)
        except BreakSignal:
            return
        for inv in s.invariants:
            self.check_expr("LoopInvMaintain", inv, inv, fr)
        if before is not None:
            after = tuple(self.resolve(self.eval(e, fr)) for e in s.decreases)
            self.ensure("Termination", s, lex_less(after, before),
                        f"loop measure went from {render_tuple(before)} to {render_tuple(after)}")
        raise Prune()

    # ----------------------------------------------------------- calls

    def callee_frame(self, t: Target, args: list, fr: Frame) -> Frame:
        sub = Frame(t.module, t.cls, t.receiver, t.decl, t.path, home=fr.home)
        for p, a in zip(t.decl.params, args):
            sub.locals[p.name] = a
            sub.types[p.name] = self.env.resolve_type(t.module, p.type)
        return sub

    def call(self, t: Target, args: list, node, fr: Frame, lhs_count: int):
        d = t.decl
        sub = self.callee_frame(t, args, fr)
        reqs = A.requires_of(d)
        if reqs:
            ob = self.active("CallPre", node)
            for r in reqs:
                ok, why = self.holds(r, sub)
                if not ok:
                    if ob is None:
                        raise Prune()
                    self.ensure("CallPre", node, False, f"precondition of {t.decl.name or 'constructor'}: {why}")
        div = self.active("DivergenceCall", node)
        if div is not None:
            self.ensure("DivergenceCall", node, False, f"call to {t.qualified}, which may diverge (decreases *)")
        term = self.active("Termination", node)
        if term is not None and fr.decreases is not None:
            new = tuple(self.resolve(self.eval(e, sub)) for e in term.measure_new)
            self.ensure("Termination", node, lex_less(new, fr.decreases),
                        f"measure {render_tuple(new)} is not below {render_tuple(fr.decreases)}")
        writes = set(self.frame_objects(A.frame_of(d), sub))
        if d.form == "constructor" and t.receiver is not None:
            writes.add(t.receiver)
        for ref in sorted(writes):
            self.on_write(ref, node, fr)
        snap = self.snapshot()
        try:
            ints = tuple(a for a in (self.resolve(x) for x in args) if isinstance(a, int))
            for ref in sorted(writes):
                self.havoc_object(ref, f"call at line {node.loc.line}")
            self.heap_version += 1
            for p in d.outs:
                rtype = self.env.resolve_type(t.module, p.type)
                sub.locals[p.name] = self.token(rtype, self.clock,
                                                f"{p.name} from call at line {node.loc.line}", ints)
                sub.types[p.name] = rtype
            sub.old = snap
            sub.entry_clock = snap.clock
            for e in A.ensures_of(d):
                self.assume(e, sub)
        finally:
            self.release(snap)
        return [sub.locals[p.name] for p in d.outs]

    def new_object(self, cls: ClassInfo, args, node, fr) -> Ref:
        ref = self.allocate(cls)
        ctor = cls.members.get(A.CTOR_KEY)
        if ctor is not None:
            t = Target("method", ctor, self.env.module(cls.module), cls, ref, f"{cls.name}.{A.CTOR_KEY}")
            self.call(t, list(args), node, fr, 0)
        return ref

    # ----------------------------------------------------------- member entry

    def run_member(self):
        c = self.check_ctx
        d = c.decl
        this = self.materialize(c.cls) if c.cls is not None else None
        fr = Frame(c.mod, c.cls, this, d, c.path, home=c.mod.name)
        if this is not None:
            self.inputs["this"] = this
        for p in d.params:
            rtype = self.env.resolve_type(c.mod, p.type)
            tok = self.token(rtype, -1, p.name)
            fr.locals[p.name] = tok
            fr.types[p.name] = rtype
            self.inputs[p.name] = tok
        for p in getattr(d, "outs", ()):
            rtype = self.env.resolve_type(c.mod, p.type)
            fr.locals[p.name] = self.token(rtype, -1, f"initial {p.name}")
            fr.types[p.name] = rtype
        fr.old = self.snapshot()
        fr.entry_clock = self.clock
        for r in A.requires_of(d):
            self.assume(r, fr)
        if isinstance(d, A.FunctionDecl):
            try:
                self.eval(d.body, fr)
            except IllFormed:
                raise Prune()
            return
        frame = A.frame_of(d)
        fr.mod_set = self.frame_objects(frame, fr) if frame else frozenset()
        if c.measure:
            fr.decreases = tuple(self.resolve(self.eval(e, fr)) for e in c.measure)
        exit_stmt = None
        try:
            self.exec(d.body, fr)
        except ReturnSignal as r:
            exit_stmt = r.stmt
        except BreakSignal:
            raise Prune()
        if exit_stmt is not None and self.active("ReturnPost", exit_stmt) is not None:
            post = A.conjoin(A.ensures_of(d))
            self.check_expr("ReturnPost", exit_stmt, post, fr)
            return
        for clause in A.specs_of(d, A.Ensures):
            self.check_expr("Ensures", clause, clause.expr, fr)

    # ----------------------------------------------------------- reporting

    def counterexample(self, ob: Obligation, message: str) -> Counterexample:
        inputs = {}
        for name, v in self.inputs.items():
            inputs[name] = self.show(v)
        pre = {}
        for oid, toks in self.pre_tokens.items():
            o = self.objects[oid]
            shown = {}
            for f, tok in toks.items():
                if isinstance(tok, Unknown) and tok.key in self.resolved:
                    shown[f] = render_value(self.resolved[tok.key])
                elif isinstance(tok, LazySet) and tok.key in self.sets:
                    st = self.sets[tok.key]
                    mem = st["closed"] if st["closed"] is not None else frozenset(
                        x for x, m in st["mem"].items() if m)
                    shown[f] = render_value(mem) + ("" if st["closed"] is not None else " (at least)")
            pre[f"{Ref(oid)!r}: {o.cls.name}"] = shown
        choices = [lbl for _i, _n, lbl in self.trace if lbl]
        return Counterexample(f"{ob.kind} at {ob.loc.file}:{ob.loc.line}:{ob.loc.column}", message,
                              inputs, pre, choices, [i for i, _n, _l in self.trace])

    def show(self, v) -> str:
        if isinstance(v, Unknown):
            return render_value(self.resolved[v.key]) if v.key in self.resolved else "(unconstrained)"
        if isinstance(v, LazySeq):
            st = self.seqs.get(v.key)
            if st is None or st["len"] is None:
                return "(unconstrained)"
            elems = []
            for i in range(st["len"]):
                e = st["elems"].get(i)
                elems.append(self.show(e) if e is not None else "_")
            return "[" + ", ".join(elems) + "]"
        if isinstance(v, LazySet):
            st = self.sets.get(v.key)
            if st is None:
                return "(unconstrained)"
            return render_value(frozenset(x for x, m in st["mem"].items() if m))
        return render_value(v)


class _NewObject:
    __slots__ = ("cls",)

    def __init__(self, cls):
        self.cls = cls


def render_tuple(t) -> str:
    return "(" + ", ".join(render_value(x) for x in t) + ")"


def default_value(rtype):
    if rtype is None:
        return None
    kind = rtype[0]
    if kind == "int":
        return 0
    if kind == "bool":
        return False
    if kind == "set":
        return frozenset()
    if kind == "seq":
        return ()
    return None


def int_literals(node) -> set:
    """Integer literals in `node`; a negated literal counts with its sign."""
    out = set()
    for n in A.walk(node):
        if isinstance(n, A.IntLit):
            out.add(n.value)
        elif isinstance(n, A.Unary) and n.op == "-" and isinstance(n.operand, A.IntLit):
            out.add(-n.operand.value)
    return out


# ------------------------------------------------------------------ per-member driver


@dataclass
class MemberResult:
    failures: dict = field(default_factory=dict)  # key -> Counterexample
    runs: int = 0
    exhausted: bool = False


class MemberCheck:
    """Explores one member against a set of active obligations."""

    def __init__(self, env: ProgramEnv, mm, path: str, decl, cls: Optional[ClassInfo],
                 obligations: list, active: set, bounds: Bounds, measure_exprs=None):
        self.env = env
        self.mm = mm
        self.mod = env.module(mm.name)
        self.path = path
        self.decl = decl
        self.cls = cls
        self.bounds = bounds
        self.by_key = {ob.key: ob for ob in obligations}
        self.active = set(active)
        self.tightened = mm.tightened
        self.measure = measure_exprs
        self._loops: dict = {}
        self._dt: dict = {}
        self.window = havoc_window(env, self.mod, decl, bounds)

    def datatype_values(self, rtype) -> list:
        key = (rtype[1], rtype[2].name)
        if key not in self._dt:
            self._dt[key] = enumerate_datatype(self.env, rtype, self.bounds.datatype_depth, self.window)
        return self._dt[key]

    def loop_targets(self, s: A.While, fr: Frame):
        key = id(s)
        if key not in self._loops:
            names, heap = set(), False
            inner_decls = set()
            for n in A.walk(s.body):
                if isinstance(n, A.VarDecl):
                    inner_decls.update(n.names)
            for n in A.walk(s.body):
                lhs = ()
                if isinstance(n, (A.Assign, A.AssignSuchThat, A.Call)):
                    lhs = n.lhs
                elif isinstance(n, A.New):
                    lhs = (n.lhs,)
                    heap = True
                elif isinstance(n, A.Modify):
                    heap = True
                if isinstance(n, A.Call) or (isinstance(n, A.Assign) and any(isinstance(r, A.Apply) for r in n.rhs)):
                    heap = True
                for x in lhs:
                    if isinstance(x, A.Name) and x.name not in inner_decls:
                        if x.name in fr.locals:
                            names.add(x.name)
                        else:
                            heap = True
                    elif isinstance(x, A.Field):
                        heap = True
            self._loops[key] = (sorted(names), heap)
        return self._loops[key]

    def explore(self) -> MemberResult:
        res = MemberResult()
        prefix: list = []
        while True:
            m = Machine(self, prefix)
            try:
                m.run_member()
            except (Prune, IllFormed):
                pass
            res.runs += 1
            for key, msg in m.failures.items():
                if key not in res.failures:
                    res.failures[key] = m.counterexample(self.by_key[key], msg)
            if self.active and all(k in res.failures for k in self.active):
                break
            prefix = next_prefix(m.trace)
            if prefix is None:
                break
            if res.runs >= self.bounds.max_runs:
                res.exhausted = True
                break
        for key, cex in res.failures.items():
            cex.replayed = self.replay(key, cex)
        return res

    def replay(self, key, cex: Counterexample) -> bool:
        m = Machine(self, list(cex.prefix))
        try:
            m.run_member()
        except (Prune, IllFormed):
            pass
        return key in m.failures


def havoc_window(env: ProgramEnv, mod, decl, bounds: Bounds) -> list:
    """Integers enumerated for unknowns: the bounds range plus every literal of the member and visible specs, each +-1."""
    lits = int_literals(decl)
    for m in env.visible_modules(mod):
        for d in _all_members(m):
            for s in getattr(d, "specs", ()):
                lits |= int_literals(s)
    window = set(range(bounds.int_low, bounds.int_high + 1))
    for v in lits:
        window |= {v - 1, v, v + 1}
    return sorted(window)


def next_prefix(trace: list) -> Optional[list]:
    t = [list(x) for x in trace]
    while t and t[-1][0] + 1 >= t[-1][1]:
        t.pop()
    if not t:
        return None
    t[-1][0] += 1
    return [x[0] for x in t]


def _all_members(mod):
    yield from mod.members.values()
    for ci in mod.classes.values():
        yield from ci.members.values()


def enumerate_datatype(env: ProgramEnv, rtype, depth: int, window) -> list:
    """All values of a datatype up to constructor nesting `depth`, integer arguments drawn from `window`."""
    mod = env.module(rtype[1])
    decl = rtype[2]

    def values(t, d):
        if t is None:
            return [0]
        if t[0] == "int":
            return list(window)
        if t[0] == "bool":
            return [False, True]
        if t[0] == "datatype":
            if d <= 0:
                return []
            out = []
            m = env.module(t[1])
            for c in t[2].ctors:
                arg_vals = [values(env.resolve_type(m, at), d - 1) for at in c.arg_types]
                for combo in itertools.product(*arg_vals):
                    out.append(DVal(c.name, tuple(combo)))
            return out
        if t[0] == "opaque":
            return [OVal(t[2], 0), OVal(t[2], 1)]
        return [None]

    return values(("datatype", mod.name, decl), depth)

"""Runtime values, heap, and the expression/statement core shared by the verifier and the interpreter.

Subclasses decide what a call, a loop, a `modify`, a havoc, or a nondeterministic
choice means: the bounded verifier summarizes and enumerates, the interpreter executes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import SourceLocation
from .env import BOOL_T, INT_T, OBJECT_T, ClassInfo, ModuleInfo, ProgramEnv
from .syntax import ast as A

# ------------------------------------------------------------------ values


@dataclass(frozen=True, order=True)
class Ref:
    """Reference to a heap object; identities are allocation-ordered integers."""

    oid: int

    def __repr__(self) -> str:
        return f"obj{self.oid}"


@dataclass(frozen=True)
class DVal:
    """Datatype value."""

    ctor: str
    args: tuple = ()

    def __repr__(self) -> str:
        if not self.args:
            return self.ctor
        return f"{self.ctor}({', '.join(render_value(a) for a in self.args)})"


@dataclass(frozen=True)
class OVal:
    """Value of an opaque type seen from outside its definition."""

    type_name: str
    index: int

    def __repr__(self) -> str:
        return f"{self.type_name}#{self.index}"


@dataclass
class Obj:
    oid: int
    cls: ClassInfo
    pre: bool  # existed in the pre-state of the member under check
    epoch: int  # allocation clock value; -1 for pre-state objects
    fields: dict = field(default_factory=dict)


def render_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (frozenset, set)):
        return "{" + ", ".join(render_value(x) for x in sorted(v, key=_sort_key)) + "}"
    if isinstance(v, tuple):
        return "[" + ", ".join(render_value(x) for x in v) + "]"
    return repr(v)


def _sort_key(v):
    if v is None:
        return (0, 0)
    if isinstance(v, bool):
        return (1, int(v))
    if isinstance(v, int):
        return (2, v)
    if isinstance(v, Ref):
        return (3, v.oid)
    return (4, repr(v))


# ------------------------------------------------------------------ control signals


class Prune(Exception):
    """The current path is infeasible (an assumption failed) or was abandoned."""


class ReturnSignal(Exception):
    def __init__(self, stmt: A.Return):
        self.stmt = stmt


class BreakSignal(Exception):
    def __init__(self, stmt: A.Break):
        self.stmt = stmt


class IllFormed(Exception):
    """An expression without a well-formedness obligation of its own went wrong."""

    def __init__(self, node, message: str):
        super().__init__(message)
        self.node = node
        self.message = message


class Trap(Exception):
    """Runtime trap in concrete execution."""

    def __init__(self, code: str, message: str, loc: SourceLocation):
        super().__init__(message)
        self.code = code
        self.message = message
        self.loc = loc


# ------------------------------------------------------------------ frames and call targets


@dataclass
class Frame:
    module: ModuleInfo
    cls: Optional[ClassInfo]
    this: Optional[Ref]
    member: object  # MethodDecl / FunctionDecl
    path: str  # member path inside its module, e.g. "Counter.Inc"
    locals: dict = field(default_factory=dict)
    types: dict = field(default_factory=dict)
    old: Optional[object] = None  # snapshot consulted by old(...)
    in_old: bool = False
    mod_set: Optional[frozenset] = None  # method frame, None = unrestricted
    entry_clock: int = 0
    modify_stack: list = field(default_factory=list)  # [(Modify node, frozenset, clock)]
    decreases: Optional[tuple] = None
    home: str = ""  # module under check; protected bodies are revealed only there


@dataclass
class Target:
    kind: str  # "function" | "method" | "ctor"
    decl: object
    module: ModuleInfo
    cls: Optional[ClassInfo]
    receiver: Optional[Ref]
    path: str

    @property
    def qualified(self) -> str:
        return f"{self.module.name}.{self.path}"


@dataclass
class Snapshot:
    fields: dict  # oid -> dict(field -> value)
    clock: int


def euclid_div(a: int, b: int) -> int:
    q = a // b if b > 0 else -(a // -b)
    if a - b * q < 0:
        q = q - 1 if b > 0 else q + 1
    return q


def euclid_mod(a: int, b: int) -> int:
    return a - b * euclid_div(a, b)


def is_ghost_member(decl) -> bool:
    return isinstance(decl, A.FunctionDecl) or (isinstance(decl, A.MethodDecl) and decl.form == "lemma")


class Semantics:
    """Evaluation core. Subclasses implement the hooks marked `hook`."""

    def __init__(self, env: ProgramEnv):
        self.env = env
        self.objects: dict = {}
        self.clock = 0
        self.heap_version = 0
        self._field_types: dict = {}

    # ----------------------------------------------------------- hooks

    def resolve(self, v):  # hook: force lazily chosen values
        return v

    def choose_guard(self, node) -> bool:  # hook: `if *`
        raise NotImplementedError

    def call(self, target: Target, args: list, node, fr: Frame, lhs_count: int):  # hook
        raise NotImplementedError

    def apply_uninterpreted(self, target: Target, args: list, node, fr: Frame):  # hook
        raise NotImplementedError

    def wf(self, kind_ok: bool, node, message: str, fr: Frame):  # hook: well-formedness failure
        if not kind_ok:
            raise IllFormed(node, message)

    def on_write(self, ref: Ref, node, fr: Frame):  # hook: frame checks
        pass

    def exec_while(self, s: A.While, fr: Frame):  # hook
        raise NotImplementedError

    def exec_such_that(self, s: A.AssignSuchThat, fr: Frame):  # hook
        raise NotImplementedError

    def exec_modify(self, s: A.Modify, fr: Frame):  # hook
        raise NotImplementedError

    def exec_assert(self, s: A.Assert, fr: Frame):  # hook
        raise NotImplementedError

    def exec_assume(self, s: A.Assume, fr: Frame):  # hook
        raise NotImplementedError

    def exec_return(self, s: A.Return, fr: Frame):
        if s.values:
            vals = [self.eval(e, fr) for e in s.values]
            for p, v in zip(fr.member.outs, vals):
                fr.locals[p.name] = v
        raise ReturnSignal(s)

    def after_assign(self, s, fr: Frame):  # hook: tighten-up checks
        pass

    def initial_field(self, cls: ClassInfo, name: str):  # hook: value of a field of a new object
        raise NotImplementedError

    # ----------------------------------------------------------- heap

    def field_type(self, cls: ClassInfo, name: str):
        key = (id(cls), name)
        t = self._field_types.get(key)
        if t is None:
            t = self.env.resolve_type(self.env.module(cls.module), cls.fields[name].type)
            self._field_types[key] = t
        return t

    def allocate(self, cls: ClassInfo, pre: bool = False) -> Ref:
        self.clock += 1
        oid = len(self.objects) + 1
        obj = Obj(oid, cls, pre, -1 if pre else self.clock)
        for name in cls.fields:
            obj.fields[name] = self.initial_field(cls, name) if not pre else None
        self.objects[oid] = obj
        self.heap_version += 1
        return Ref(oid)

    def obj(self, ref: Ref) -> Obj:
        return self.objects[ref.oid]

    def deref(self, ref, node, fr: Frame) -> Obj:
        ref = self.resolve(ref)
        self.wf(ref is not None, node, "possible null dereference", fr)
        if not isinstance(ref, Ref):
            raise IllFormed(node, "field access on a non-object")
        return self.objects[ref.oid]

    def read_field(self, ref, name: str, node, fr: Frame):
        o = self.deref(ref, node, fr)
        if name not in o.fields:
            raise IllFormed(node, f"object of class {o.cls.name} has no field {name}")
        if fr.in_old and fr.old is not None:
            snap = fr.old.fields.get(o.oid)
            if snap is not None and name in snap:
                return self.resolve(snap[name])
        v = self.resolve(o.fields[name])
        o.fields[name] = v
        return v

    def write_field(self, ref, name: str, value, node, fr: Frame):
        o = self.deref(ref, node, fr)
        self.on_write(Ref(o.oid), node, fr)
        if name not in o.fields:
            raise IllFormed(node, f"object of class {o.cls.name} has no field {name}")
        o.fields[name] = value
        self.heap_version += 1

    def snapshot(self) -> Snapshot:
        return Snapshot({oid: dict(o.fields) for oid, o in self.objects.items()}, self.clock)

    def is_fresh(self, v, fr: Frame) -> bool:
        v = self.resolve(v)
        if not isinstance(v, Ref):
            return False
        o = self.objects[v.oid]
        return not o.pre and o.epoch > (fr.old.clock if fr.old is not None else fr.entry_clock)

    # ----------------------------------------------------------- collections

    def as_set(self, v) -> frozenset:
        v = self.resolve(v)
        if isinstance(v, frozenset):
            return v
        raise IllFormed(None, "expected a set")

    def as_seq(self, v) -> tuple:
        v = self.resolve(v)
        if isinstance(v, tuple):
            return v
        raise IllFormed(None, "expected a sequence")

    def contains(self, coll, x) -> bool:
        coll = self.resolve(coll)
        if isinstance(coll, tuple):
            return any(self.equal(x, y) for y in coll)
        return self.hashable(x) in coll

    def seq_len(self, s) -> int:
        return len(self.as_seq(s))

    def seq_index(self, s, i: int):
        return self.resolve(self.as_seq(s)[i])

    def hashable(self, v):
        v = self.resolve(v)
        if isinstance(v, tuple):
            return tuple(self.hashable(x) for x in v)
        return v

    def equal(self, a, b) -> bool:
        a, b = self.hashable(a), self.hashable(b)
        if isinstance(a, frozenset) or isinstance(b, frozenset):
            return self.as_set(a) == self.as_set(b)
        if isinstance(a, bool) != isinstance(b, bool):
            return False
        return a == b

    # ----------------------------------------------------------- names and calls

    def lookup_local(self, name: str, fr: Frame):
        return self.resolve(fr.locals[name])

    def eval_name(self, e: A.Name, fr: Frame):
        if e.name in fr.locals:
            v = self.lookup_local(e.name, fr)
            fr.locals[e.name] = v
            return v
        if fr.cls is not None and e.name in fr.cls.fields:
            return self.read_field(fr.this, e.name, e, fr)
        ctor = self.env.lookup_datatype_ctor(fr.module, e.name)
        if ctor is not None:
            return DVal(e.name)
        raise IllFormed(e, f"unbound name {e.name}")

    def is_import_qualifier(self, e, fr: Frame) -> bool:
        return (isinstance(e, A.Name) and e.name not in fr.locals
                and not (fr.cls is not None and e.name in fr.cls.fields)
                and e.name in fr.module.imports)

    def target(self, callee, fr: Frame, node) -> Optional[Target]:
        """Resolve a callee expression to a function, method, or datatype constructor."""
        env = self.env
        if isinstance(callee, A.Name):
            n = callee.name
            if fr.cls is not None and n in fr.cls.members:
                d = fr.cls.members[n]
                return Target(_kind(d), d, env.module(fr.cls.module), fr.cls, fr.this, f"{fr.cls.name}.{n}")
            if n in fr.module.members:
                d = fr.module.members[n]
                return Target(_kind(d), d, fr.module, None, None, n)
            c = env.lookup_datatype_ctor(fr.module, n)
            if c is not None:
                return Target("ctor", c[1], fr.module, None, None, n)
            return None
        if isinstance(callee, A.Field):
            if self.is_import_qualifier(callee.obj, fr):
                mod = env.imported(fr.module, callee.obj.name)
                if mod is None:
                    return None
                n = callee.name
                if n in mod.members:
                    return Target(_kind(mod.members[n]), mod.members[n], mod, None, None, n)
                if n in mod.ctors:
                    return Target("ctor", mod.ctors[n][1], mod, None, None, n)
                return None
            recv = self.resolve(self.eval(callee.obj, fr))
            o = self.deref(recv, callee, fr)
            d = o.cls.members.get(callee.name)
            if d is None:
                return None
            return Target(_kind(d), d, env.module(o.cls.module), o.cls, Ref(o.oid), f"{o.cls.name}.{callee.name}")
        return None

    def revealed(self, t: Target, fr: Frame) -> bool:
        d = t.decl
        if d.body is None:
            return False
        if d.is_protected and t.module.name != self.home_module(fr):
            return False
        return True

    def home_module(self, fr: Frame) -> str:
        return fr.home or fr.module.name

    def apply_function(self, t: Target, args: list, node, fr: Frame):
        d = t.decl
        if not self.revealed(t, fr):
            return self.apply_uninterpreted(t, args, node, fr)
        sub = Frame(t.module, t.cls, t.receiver, d, t.path, old=fr.old, in_old=fr.in_old,
                    mod_set=fr.mod_set, entry_clock=fr.entry_clock)
        sub.home = fr.home
        for p, a in zip(d.params, args):
            sub.locals[p.name] = a
        self.depth_guard(node)
        try:
            return self.eval(d.body, sub)
        finally:
            self.call_depth -= 1

    call_depth = 0

    def depth_guard(self, node):
        self.call_depth += 1
        if self.call_depth > 200:
            self.call_depth -= 1
            raise self.depth_exceeded(node)

    def depth_exceeded(self, node):
        return Prune()

    # ----------------------------------------------------------- expressions

    def eval(self, e, fr: Frame):
        m = getattr(self, "e_" + type(e).__name__)
        return m(e, fr)

    def truth(self, e, fr: Frame) -> bool:
        v = self.resolve(self.eval(e, fr))
        if not isinstance(v, bool):
            raise IllFormed(e, "expected a boolean")
        return v

    def integer(self, e, fr: Frame) -> int:
        v = self.resolve(self.eval(e, fr))
        if isinstance(v, bool) or not isinstance(v, int):
            raise IllFormed(e, "expected an integer")
        return v

    def e_IntLit(self, e, fr):
        return e.value

    def e_BoolLit(self, e, fr):
        return e.value

    def e_NullLit(self, e, fr):
        return None

    def e_This(self, e, fr):
        return fr.this

    def e_Name(self, e, fr):
        return self.eval_name(e, fr)

    def e_Field(self, e, fr):
        if self.is_import_qualifier(e.obj, fr):
            mod = self.env.imported(fr.module, e.obj.name)
            if mod is not None and e.name in mod.ctors:
                return DVal(e.name)
            raise IllFormed(e, f"{e.obj.name}.{e.name} is not a value")
        return self.read_field(self.eval(e.obj, fr), e.name, e, fr)

    def e_Unary(self, e, fr):
        if e.op == "!":
            return not self.truth(e.operand, fr)
        return -self.integer(e.operand, fr)

    def e_Binary(self, e, fr):
        op = e.op
        if op == "&&":
            return self.truth(e.left, fr) and self.truth(e.right, fr)
        if op == "||":
            return self.truth(e.left, fr) or self.truth(e.right, fr)
        if op == "==>":
            return (not self.truth(e.left, fr)) or self.truth(e.right, fr)
        if op == "<==>":
            return self.truth(e.left, fr) == self.truth(e.right, fr)
        a = self.resolve(self.eval(e.left, fr))
        b = self.resolve(self.eval(e.right, fr))
        return self.binop(op, a, b, e, fr)

    def binop(self, op, a, b, node, fr):
        if op in ("==", "!=", "≠"):
            eq = self.equal(a, b)
            return eq if op == "==" else not eq
        if op in ("in", "!in"):
            r = self.contains(b, a)
            return r if op == "in" else not r
        if isinstance(a, tuple) or isinstance(b, tuple):
            if op == "+":
                return self.as_seq(a) + self.as_seq(b)
            raise IllFormed(node, f"operator {op} on sequences")
        if self.is_set(a) or self.is_set(b):
            x, y = self.as_set(a), self.as_set(b)
            if op == "+":
                return x | y
            if op == "-":
                return x - y
            if op == "*":
                return x & y
            if op == "<=":
                return x <= y
            if op == "<":
                return x < y
            if op == ">=":
                return x >= y
            if op == ">":
                return x > y
            raise IllFormed(node, f"operator {op} on sets")
        if isinstance(a, bool) or isinstance(b, bool) or not isinstance(a, int) or not isinstance(b, int):
            raise IllFormed(node, f"operator {op} expects integers")
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op in ("/", "%"):
            self.wf(b != 0, node, "possible division by zero", fr)
            return euclid_div(a, b) if op == "/" else euclid_mod(a, b)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        raise IllFormed(node, f"unknown operator {op}")

    def is_set(self, v) -> bool:
        return isinstance(v, frozenset)

    def e_Chain(self, e, fr):
        left = self.resolve(self.eval(e.operands[0], fr))
        for op, rhs in zip(e.ops, e.operands[1:]):
            right = self.resolve(self.eval(rhs, fr))
            if not self.binop(op, left, right, e, fr):
                return False
            left = right
        return True

    def e_Ite(self, e, fr):
        return self.eval(e.then if self.truth(e.cond, fr) else e.else_, fr)

    def e_Match(self, e, fr):
        v = self.resolve(self.eval(e.scrutinee, fr))
        if not isinstance(v, DVal):
            raise IllFormed(e, "match on a non-datatype value")
        for c in e.cases:
            if c.ctor.split(".")[-1] == v.ctor:
                saved = {n: fr.locals.get(n, _MISSING) for n in c.vars}
                for n, a in zip(c.vars, v.args):
                    fr.locals[n] = a
                try:
                    return self.eval(c.body, fr)
                finally:
                    for n, old in saved.items():
                        if old is _MISSING:
                            fr.locals.pop(n, None)
                        else:
                            fr.locals[n] = old
        raise IllFormed(e, f"no case for {v.ctor}")

    def e_SetDisplay(self, e, fr):
        return frozenset(self.hashable(self.eval(x, fr)) for x in e.elems)

    def e_SeqDisplay(self, e, fr):
        return tuple(self.hashable(self.eval(x, fr)) for x in e.elems)

    def e_Length(self, e, fr):
        v = self.resolve(self.eval(e.operand, fr))
        if self.is_set(v):
            return len(self.as_set(v))
        return self.seq_len(v)

    def e_Index(self, e, fr):
        s = self.resolve(self.eval(e.seq, fr))
        i = self.integer(e.index, fr)
        self.wf(0 <= i < self.seq_len(s), e, "index possibly out of range", fr)
        return self.seq_index(s, i)

    def e_Old(self, e, fr):
        if fr.in_old:
            return self.eval(e.operand, fr)
        fr.in_old = True
        try:
            return self.eval(e.operand, fr)
        finally:
            fr.in_old = False

    def e_Fresh(self, e, fr):
        v = self.resolve(self.eval(e.operand, fr))
        if v is None or isinstance(v, Ref):
            return self.is_fresh(v, fr)
        return all(self.is_fresh(x, fr) for x in self.as_set(v))

    def e_Apply(self, e, fr):
        t = self.target(e.callee, fr, e)
        if t is None:
            raise IllFormed(e, "unresolved callee")
        args = [self.eval(a, fr) for a in e.args]
        if t.kind == "ctor":
            return DVal(t.decl.name, tuple(self.hashable(a) for a in args))
        if t.kind == "function":
            return self.apply_function(t, args, e, fr)
        raise IllFormed(e, "method call inside an expression")

    # ----------------------------------------------------------- statements

    def exec(self, s, fr: Frame):
        getattr(self, "s_" + type(s).__name__)(s, fr)

    def s_Block(self, s, fr):
        for x in s.stmts:
            self.exec(x, fr)

    def s_Labeled(self, s, fr):
        self.exec(s.stmt, fr)

    def s_VarDecl(self, s, fr):
        for n, t in zip(s.names, s.types):
            fr.locals[n] = self.default_local(t, fr)
            if t is not None:
                fr.types[n] = self.env.resolve_type(fr.module, t)
        if s.init is not None:
            self.exec(s.init, fr)
            for n in s.names:
                if n not in fr.types:
                    fr.types[n] = self.type_of_value(self.resolve(fr.locals[n]))

    def default_local(self, t, fr):  # hook
        return None

    def type_of_value(self, v):
        if isinstance(v, bool):
            return BOOL_T
        if isinstance(v, int):
            return INT_T
        if isinstance(v, Ref):
            return ("class", self.objects[v.oid].cls)
        if isinstance(v, frozenset):
            return ("set", OBJECT_T)
        if isinstance(v, tuple):
            return ("seq", INT_T)
        return OBJECT_T

    def s_Assign(self, s, fr):
        if len(s.rhs) == 1 and isinstance(s.rhs[0], A.Apply):
            rhs = s.rhs[0]
            t = self.target(rhs.callee, fr, rhs)
            if t is not None and t.kind == "method":
                args = [self.eval(a, fr) for a in rhs.args]
                outs = self.call(t, args, rhs, fr, len(s.lhs))
                for lhs, v in zip(s.lhs, outs):
                    self.assign(lhs, v, s, fr)
                self.after_assign(s, fr)
                return
        vals = [self.eval(r, fr) for r in s.rhs]
        targets = [self.lvalue(lhs, fr) for lhs in s.lhs]
        for tgt, v in zip(targets, vals):
            self.store(tgt, v, s, fr)
        self.after_assign(s, fr)

    def lvalue(self, lhs, fr):
        if isinstance(lhs, A.Name):
            if lhs.name in fr.locals:
                return ("local", lhs.name)
            if fr.cls is not None and lhs.name in fr.cls.fields:
                return ("field", fr.this, lhs.name, lhs)
            raise IllFormed(lhs, f"unbound name {lhs.name}")
        if isinstance(lhs, A.Field):
            return ("field", self.resolve(self.eval(lhs.obj, fr)), lhs.name, lhs)
        raise IllFormed(lhs, "bad assignment target")

    def store(self, tgt, v, s, fr):
        if tgt[0] == "local":
            fr.locals[tgt[1]] = v
        else:
            self.write_field(tgt[1], tgt[2], v, tgt[3], fr)

    def assign(self, lhs, v, s, fr):
        self.store(self.lvalue(lhs, fr), v, s, fr)

    def s_Call(self, s, fr):
        t = self.target(s.callee, fr, s)
        if t is None or t.kind != "method":
            raise IllFormed(s, "unresolved method")
        args = [self.eval(a, fr) for a in s.args]
        outs = self.call(t, args, s, fr, len(s.lhs))
        for lhs, v in zip(s.lhs, outs):
            self.assign(lhs, v, s, fr)

    def s_New(self, s, fr):
        cls = self.env.lookup_class(fr.module, s.cls.name)
        if cls is None:
            raise IllFormed(s, f"unknown class {s.cls.name}")
        args = [self.eval(a, fr) for a in s.args]
        tgt = self.lvalue(s.lhs, fr)
        ref = self.new_object(cls, args, s, fr)
        self.store(tgt, ref, s, fr)

    def new_object(self, cls: ClassInfo, args, node, fr) -> Ref:  # hook
        raise NotImplementedError

    def s_If(self, s, fr):
        if isinstance(s.guard, A.Star):
            take = self.choose_guard(s)
        else:
            take = self.truth(s.guard, fr)
        self.branch_taken(s, take)
        if take:
            self.exec(s.then, fr)
        elif s.else_ is not None:
            self.exec(s.else_, fr)

    def branch_taken(self, s, take: bool):
        pass

    def s_While(self, s, fr):
        self.exec_while(s, fr)

    def s_AssignSuchThat(self, s, fr):
        self.exec_such_that(s, fr)

    def s_Assert(self, s, fr):
        self.exec_assert(s, fr)

    def s_Assume(self, s, fr):
        self.exec_assume(s, fr)

    def s_Return(self, s, fr):
        self.exec_return(s, fr)

    def s_Break(self, s, fr):
        raise BreakSignal(s)

    def s_Modify(self, s, fr):
        self.exec_modify(s, fr)

    def frame_objects(self, exprs, fr: Frame) -> frozenset:
        """Objects denoted by a frame expression list (single objects or sets)."""
        out = set()
        for e in exprs:
            v = self.resolve(self.eval(e, fr))
            if v is None:
                continue
            if isinstance(v, Ref):
                out.add(v)
            elif self.is_set(v):
                out.update(x for x in self.as_set(v) if isinstance(x, Ref))
        return frozenset(out)


_MISSING = object()


def _kind(decl) -> str:
    return "function" if isinstance(decl, A.FunctionDecl) else "method"

"""AST for the refinement language.

Nodes are frozen dataclasses. Equality is structural and ignores source
locations, so ``a == b`` is the "structurally equal modulo locations" test used
by the round-trip property and by the merge's assert matching. Node *identity*
(``is`` / ``id()``) is what provenance and obligation anchors key on; merging
shares inherited nodes with the base module instead of copying them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Union

from ..diagnostics import NOWHERE, SourceLocation


def _loc():
    return field(default=NOWHERE, compare=False, repr=False)


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class TypeRef:
    name: str
    args: tuple = ()
    loc: SourceLocation = _loc()

    def __str__(self) -> str:
        if self.args:
            return f"{self.name}<{', '.join(str(a) for a in self.args)}>"
        return self.name


INT = TypeRef("int")
BOOL = TypeRef("bool")
OBJECT = TypeRef("object")


# ---------------------------------------------------------------- markers


@dataclass(frozen=True)
class Star:
    """`*` guard of a nondeterministic if/while."""


@dataclass(frozen=True)
class Elided:
    """`...` in place of a guard, condition, or frame."""


STAR = Star()
ELIDED = Elided()

# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class NullLit(Expr):
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class This(Expr):
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Name(Expr):
    name: str
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Field(Expr):
    obj: Expr
    name: str
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Chain(Expr):
    """`a <= b < c`: operands[i] ops[i] operands[i+1], conjoined."""

    ops: tuple
    operands: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Case:
    ctor: str
    vars: tuple
    body: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Match(Expr):
    scrutinee: Expr
    cases: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class SetDisplay(Expr):
    elems: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class SeqDisplay(Expr):
    elems: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Length(Expr):
    operand: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Index(Expr):
    seq: Expr
    index: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Old(Expr):
    operand: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Fresh(Expr):
    operand: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Apply(Expr):
    callee: Expr  # Name or Field
    args: tuple
    loc: SourceLocation = _loc()


# ---------------------------------------------------------------- statements


@dataclass(frozen=True)
class Stmt:
    pass


@dataclass(frozen=True)
class Block(Stmt):
    stmts: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Assign(Stmt):
    lhs: tuple
    rhs: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class AssignSuchThat(Stmt):
    lhs: tuple
    cond: Expr
    assume: bool = False
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class New(Stmt):
    lhs: Expr
    cls: TypeRef
    args: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Call(Stmt):
    """Method/lemma call; produced from Assign/expression statements once the callee is known."""

    lhs: tuple
    callee: Expr
    args: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class VarDecl(Stmt):
    names: tuple
    types: tuple  # Optional[TypeRef] per name
    ghost: bool = False
    init: Optional[Stmt] = None  # Assign / AssignSuchThat / New / Call over `names`
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class If(Stmt):
    guard: Union[Expr, Star, Elided]
    then: Block
    else_: Optional[Block] = None
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class While(Stmt):
    guard: Union[Expr, Star, Elided]
    invariants: tuple
    body: Block
    decreases: tuple = ()
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Assert(Stmt):
    cond: Union[Expr, Elided]
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Assume(Stmt):
    cond: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Return(Stmt):
    values: tuple = ()
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Break(Stmt):
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Modify(Stmt):
    frame: Union[tuple, Elided]
    body: Optional[Block] = None
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Elision(Stmt):
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Labeled(Stmt):
    label: str
    stmt: Stmt
    loc: SourceLocation = _loc()


# ---------------------------------------------------------------- specs


@dataclass(frozen=True)
class Requires:
    expr: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Ensures:
    expr: Expr
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Modifies:
    frame: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Reads:
    frame: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Decreases:
    star: bool
    exprs: tuple = ()
    loc: SourceLocation = _loc()

    def __post_init__(self):
        if self.star == bool(self.exprs):
            raise ValueError("decreases is either `*` or a non-empty tuple")


# ---------------------------------------------------------------- declarations


@dataclass(frozen=True)
class Param:
    name: str
    type: TypeRef
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class Ctor:
    name: str
    arg_types: tuple
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class ImportDecl:
    name: str
    mode: str  # "eq" | "as" | "default"
    target: str
    default: Optional[str] = None
    loc: SourceLocation = _loc()

    kind = "import"


@dataclass(frozen=True)
class TypeDecl:
    name: str
    form: str  # "opaque" | "synonym" | "datatype"
    synonym: Optional[TypeRef] = None
    ctors: tuple = ()
    loc: SourceLocation = _loc()

    kind = "type"


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    is_predicate: bool
    is_protected: bool
    params: tuple
    result: TypeRef
    specs: tuple
    body: Optional[Expr] = None
    sig_elided: bool = False
    loc: SourceLocation = _loc()

    kind = "function"


@dataclass(frozen=True)
class MethodDecl:
    name: str
    form: str  # "method" | "constructor" | "lemma"
    params: tuple
    outs: tuple
    specs: tuple
    body: Optional[Block] = None
    sig_elided: bool = False
    loc: SourceLocation = _loc()

    kind = "method"

    def __post_init__(self):
        if self.form == "constructor" and self.outs:
            raise ValueError("constructors have no out-parameters")


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: TypeRef
    ghost: bool = False
    loc: SourceLocation = _loc()

    kind = "field"


@dataclass(frozen=True)
class ClassDecl:
    name: str
    members: tuple  # FieldDecl / FunctionDecl / MethodDecl, in source order
    loc: SourceLocation = _loc()

    kind = "class"

    @property
    def fields(self) -> tuple:
        return tuple(m for m in self.members if isinstance(m, FieldDecl))


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    is_abstract: bool = False
    refines: Optional[str] = None
    decls: tuple = ()
    loc: SourceLocation = _loc()


@dataclass(frozen=True)
class SourceProgram:
    modules: tuple


# ---------------------------------------------------------------- helpers

CTOR_KEY = "constructor"


def member_key(decl) -> str:
    """Namespace key of a declaration (constructors are anonymous)."""
    if isinstance(decl, MethodDecl) and decl.form == "constructor":
        return CTOR_KEY
    return decl.name


def specs_of(decl, kind) -> list:
    return [s for s in getattr(decl, "specs", ()) if isinstance(s, kind)]


def requires_of(decl) -> list:
    return [s.expr for s in specs_of(decl, Requires)]


def ensures_of(decl) -> list:
    return [s.expr for s in specs_of(decl, Ensures)]


def frame_of(decl, kind=Modifies) -> list:
    out = []
    for s in specs_of(decl, kind):
        out.extend(s.frame)
    return out


def decreases_of(decl) -> Optional[Decreases]:
    ds = specs_of(decl, Decreases)
    return ds[0] if ds else None


def children(node):
    """Direct AST children (expressions, statements, specs) of `node`."""
    if not dataclasses.is_dataclass(node):
        return
    for f in dataclasses.fields(node):
        if f.name == "loc":
            continue
        v = getattr(node, f.name)
        if isinstance(v, tuple):
            for item in v:
                if dataclasses.is_dataclass(item):
                    yield item
        elif dataclasses.is_dataclass(v) and not isinstance(v, (Star, Elided, TypeRef)):
            yield v


def walk(node):
    """Pre-order traversal over every reachable AST node."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        kids = list(children(n))
        stack.extend(reversed(kids))


def transform(node, fn):
    """Bottom-up rebuild: `fn(rebuilt_node)` may return a replacement.

    Nodes whose children are unchanged are preserved by identity.
    """
    if isinstance(node, tuple):
        new = tuple(transform(x, fn) for x in node)
        return node if all(a is b for a, b in zip(new, node)) else new
    if not dataclasses.is_dataclass(node) or isinstance(node, (Star, Elided, TypeRef)):
        return node
    changes = {}
    for f in dataclasses.fields(node):
        if f.name == "loc":
            continue
        v = getattr(node, f.name)
        nv = transform(v, fn)
        if nv is not v:
            changes[f.name] = nv
    rebuilt = dataclasses.replace(node, **changes) if changes else node
    out = fn(rebuilt)
    return rebuilt if out is None else out


def substitute(node, mapping: dict):
    """Replace free `Name`s according to `mapping` (name -> Expr)."""
    if not mapping:
        return node

    def fn(n):
        if isinstance(n, Name) and n.name in mapping:
            return mapping[n.name]
        return None

    return transform(node, fn)


def conjuncts(e: Expr) -> list:
    if isinstance(e, Binary) and e.op == "&&":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def conjoin(parts, loc: SourceLocation = NOWHERE) -> Expr:
    parts = list(parts)
    if not parts:
        return BoolLit(True, loc)
    out = parts[0]
    for p in parts[1:]:
        out = Binary("&&", out, p, loc)
    return out

"""Extend / Define / Refine: skeleton merging with provenance and legality checks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .diagnostics import ERROR, Diagnostic, RefineError, SourceLocation
from .resolve import ImportBinding, tighten_import
from .syntax import ast as A

SIGNATURE_MISMATCH = "SIGNATURE_MISMATCH"
KIND_MISMATCH = "KIND_MISMATCH"
ILLEGAL_REQUIRES_CHANGE = "ILLEGAL_REQUIRES_CHANGE"
ILLEGAL_FRAME_CHANGE = "ILLEGAL_FRAME_CHANGE"
ILLEGAL_DECREASES_CHANGE = "ILLEGAL_DECREASES_CHANGE"
ILLEGAL_BODY_CHANGE = "ILLEGAL_BODY_CHANGE"
TYPE_REDEFINITION = "TYPE_REDEFINITION"
MERGE_MISMATCH = "MERGE_MISMATCH"
ORDER_VIOLATION = "ORDER_VIOLATION"
NEW_STATE_VIOLATION = "NEW_STATE_VIOLATION"
ILLEGAL_BREAK = "ILLEGAL_BREAK"
STRENGTHENING_UNPROTECTED = "STRENGTHENING_UNPROTECTED"

INHERITED = "inherited"
SUPERIMPOSED = "superimposed"
TIGHTENED = "tightened"

MARKS = {INHERITED: "=", SUPERIMPOSED: "+", TIGHTENED: "~"}

COPIED = "Copied"
EXTENDED = "Extended"
DEFINED = "Defined"
REFINED = "Refined"


@dataclass(frozen=True)
class Origin:
    kind: str  # INHERITED | SUPERIMPOSED | TIGHTENED
    base_loc: Optional[SourceLocation] = None


@dataclass(frozen=True)
class Directive:
    kind: str  # "Extend" | "Define" | "Refine" | "Copy"
    path: str
    base: object = None
    refining: object = None


@dataclass
class SpecDelta:
    added_ensures: list = field(default_factory=list)  # Ensures nodes
    decreases: Optional[A.Decreases] = None  # replacement, if any


@dataclass
class Alignment:
    entries: list = field(default_factory=list)  # ("match", skel, base) | ("absorb", elision, [base]) | ("insert", skel)

    def add(self, *entry):
        self.entries.append(entry)


@dataclass
class MergedModule:
    module: A.ModuleDecl
    base: Optional["MergedModule"] = None
    provenance: dict = field(default_factory=dict)  # id(stmt|expr) -> Origin
    member_origin: dict = field(default_factory=dict)  # path -> COPIED/EXTENDED/DEFINED/REFINED
    spec_delta: dict = field(default_factory=dict)  # path -> SpecDelta
    predicate_conjuncts: dict = field(default_factory=dict)  # path -> [(module, body)]
    strengthened: set = field(default_factory=set)  # predicate paths strengthened in this step
    new_fields: dict = field(default_factory=dict)  # class name -> {field names}
    tightened: dict = field(default_factory=dict)  # id(new stmt) -> base stmt
    assume_to_assert: dict = field(default_factory=dict)  # id(assert) -> base assume
    new_invariants: dict = field(default_factory=dict)  # id(while) -> [expr]
    new_decreases: set = field(default_factory=set)  # id(while) whose metric is new
    defined_regions: set = field(default_factory=set)  # ids exempt from the New State Principle
    superimposed_returns: list = field(default_factory=list)
    alignments: dict = field(default_factory=dict)  # path -> Alignment
    decl_marks: dict = field(default_factory=dict)  # id(decl) -> provenance mark of its header lines
    _keep: list = field(default_factory=list, repr=False)

    @property
    def name(self) -> str:
        return self.module.name

    def origin(self, node) -> Optional[Origin]:
        return self.provenance.get(id(node))

    def mark(self, node) -> str:
        o = self.provenance.get(id(node))
        if o is not None:
            return MARKS[o.kind]
        return self.decl_marks.get(id(node), "")

    def _mark_decls(self, base_ids: set):
        self.decl_marks[id(self.module)] = "=" if self.base is not None else "+"
        for d in self.module.decls:
            self.decl_marks[id(d)] = "=" if (id(d) in base_ids or A.member_key(d) in base_ids) else "+"
            if isinstance(d, A.ClassDecl):
                for m in d.members:
                    key = f"{d.name}.{A.member_key(m)}"
                    self.decl_marks[id(m)] = "+" if self.member_origin.get(key) == EXTENDED else "="

    def members(self):
        """Yield (path, decl, class_decl_or_None) for every member."""
        for d in self.module.decls:
            if isinstance(d, A.ClassDecl):
                for m in d.members:
                    yield f"{d.name}.{A.member_key(m)}", m, d
            else:
                yield A.member_key(d), d, None

    def member(self, path: str):
        for p, d, _ in self.members():
            if p == path:
                return d
        return None

    @staticmethod
    def root(module: A.ModuleDecl) -> "MergedModule":
        mm = MergedModule(module)
        for path, d, _ in mm.members():
            mm.member_origin[path] = EXTENDED
            if isinstance(d, A.FunctionDecl) and d.body is not None:
                mm.predicate_conjuncts[path] = [(module.name, d.body)]
            for s in d.specs if hasattr(d, "specs") else ():
                mm.provenance[id(s)] = Origin(SUPERIMPOSED)
            body = getattr(d, "body", None)
            if isinstance(body, A.Block):
                _tag_tree(mm, body, Origin(SUPERIMPOSED))
                _mark_defined(mm, body)
            elif body is not None:
                mm.provenance[id(body)] = Origin(SUPERIMPOSED)
        for d in module.decls:
            if isinstance(d, A.ClassDecl):
                mm.new_fields[d.name] = {f.name for f in d.fields}
        mm._mark_decls(set())
        return mm


def _tag_tree(mm: MergedModule, node, origin: Origin):
    for n in A.walk(node):
        if isinstance(n, (A.Stmt, A.Expr)):
            mm.provenance.setdefault(id(n), origin)
    mm._keep.append(node)


def _mark_defined(mm: MergedModule, node):
    for n in A.walk(node):
        mm.defined_regions.add(id(n))


def _err(code, msg, loc):
    raise RefineError(msg, loc, code)


# ------------------------------------------------------------------ directives


def classify_directives(base: A.ModuleDecl, refining: A.ModuleDecl) -> list:
    out = []

    def one(path, b, r):
        if b is None:
            return Directive("Extend", path, None, r)
        if isinstance(b, A.TypeDecl):
            return Directive("Define" if b.form == "opaque" and r.form != "opaque" else "Refine", path, b, r)
        if isinstance(b, (A.FunctionDecl, A.MethodDecl)) and b.body is None and getattr(r, "body", None) is not None:
            return Directive("Define", path, b, r)
        return Directive("Refine", path, b, r)

    base_map = {A.member_key(d): d for d in base.decls}
    mentioned = set()
    for r in refining.decls:
        key = A.member_key(r)
        mentioned.add(key)
        b = base_map.get(key)
        if isinstance(b, A.ClassDecl) and isinstance(r, A.ClassDecl):
            bm = {A.member_key(x): x for x in b.members}
            seen = set()
            for rm in r.members:
                k = A.member_key(rm)
                seen.add(k)
                out.append(one(f"{r.name}.{k}", bm.get(k), rm))
            for k, x in bm.items():
                if k not in seen:
                    out.append(Directive("Copy", f"{b.name}.{k}", x, None))
        else:
            out.append(one(key, b, r))
    for key, b in base_map.items():
        if key not in mentioned:
            out.append(Directive("Copy", key, b, None))
    return out


# ------------------------------------------------------------------ module merge


class Merger:
    def __init__(self, base: MergedModule, refining: A.ModuleDecl, graph=None,
                 lookup: Optional[Callable[[str], A.ModuleDecl]] = None):
        self.base = base
        self.ref = refining
        self.graph = graph
        self.lookup = lookup
        self.mm = MergedModule(module=None, base=base)  # type: ignore[arg-type]
        self.diags: list = []

    def run(self) -> MergedModule:
        base_mod = self.base.module
        ref_map = {A.member_key(d): d for d in self.ref.decls}
        decls = []
        for b in base_mod.decls:
            key = A.member_key(b)
            r = ref_map.get(key)
            try:
                decls.append(self.top(b, r))
            except RefineError as e:
                self.diags.append(e.diagnostic())
                decls.append(b)
        for r in self.ref.decls:
            if A.member_key(r) not in {A.member_key(b) for b in base_mod.decls}:
                decls.append(self.extend_top(r))
        self.mm.module = A.ModuleDecl(self.ref.name, self.ref.is_abstract, self.ref.refines, tuple(decls), self.ref.loc)
        self.mm._mark_decls({A.member_key(b) for b in base_mod.decls})
        return self.mm

    # -------------------------------------------------------------- top level

    def extend_top(self, r):
        if isinstance(r, A.ClassDecl):
            self.mm.new_fields[r.name] = {f.name for f in r.fields}
            for m in r.members:
                self.extend_member(f"{r.name}.{A.member_key(m)}", m)
        else:
            self.extend_member(A.member_key(r), r)
        return r

    def extend_member(self, path, r):
        self.mm.member_origin[path] = EXTENDED
        for s in getattr(r, "specs", ()):
            self.mm.provenance[id(s)] = Origin(SUPERIMPOSED)
        body = getattr(r, "body", None)
        if isinstance(body, A.Block):
            _tag_tree(self.mm, body, Origin(SUPERIMPOSED))
            _mark_defined(self.mm, body)
        elif isinstance(r, A.FunctionDecl) and body is not None:
            self.mm.provenance[id(body)] = Origin(SUPERIMPOSED)
            self.mm.predicate_conjuncts[path] = [(self.ref.name, body)]

    def copy_member(self, path, b):
        self.mm.member_origin[path] = COPIED
        self._inherit_member_info(path, b)
        return b

    def _inherit_member_info(self, path, b):
        if path in self.base.predicate_conjuncts:
            self.mm.predicate_conjuncts[path] = list(self.base.predicate_conjuncts[path])
        for s in getattr(b, "specs", ()):
            self.mm.provenance[id(s)] = Origin(INHERITED)
        body = getattr(b, "body", None)
        if body is not None:
            for n in A.walk(body):
                if isinstance(n, (A.Stmt, A.Expr)):
                    self.mm.provenance[id(n)] = Origin(INHERITED)

    def top(self, b, r):
        key = A.member_key(b)
        if r is None:
            if isinstance(b, A.ClassDecl):
                for m in b.members:
                    self.copy_member(f"{b.name}.{A.member_key(m)}", m)
                return b
            return self.copy_member(key, b)
        if isinstance(b, A.ImportDecl):
            if not isinstance(r, A.ImportDecl):
                _err(KIND_MISMATCH, f"{key} is an import in the refined module", r.loc)
            self.mm.member_origin[key] = REFINED if r != b else COPIED
            if self.graph is None or self.lookup is None:
                return r
            nb = tighten_import(ImportBinding.of(b), ImportBinding.of(r), self.graph, self.lookup, r.loc)
            return A.ImportDecl(nb.local_name, nb.mode, nb.target, nb.default, r.loc)
        if isinstance(b, A.TypeDecl):
            return self.merge_type(b, r)
        if isinstance(b, A.ClassDecl):
            if not isinstance(r, A.ClassDecl):
                _err(KIND_MISMATCH, f"{key} is a class in the refined module", r.loc)
            return self.merge_class(b, r)
        return self.member(key, b, r)

    def merge_type(self, b: A.TypeDecl, r):
        if not isinstance(r, A.TypeDecl):
            _err(KIND_MISMATCH, f"{b.name} is a type in the refined module", r.loc)
        if r.form == "opaque" or r == b:
            self.mm.member_origin[b.name] = COPIED
            return b
        if b.form != "opaque":
            _err(TYPE_REDEFINITION, f"type {b.name} is already defined in the refined module", r.loc)
        self.mm.member_origin[b.name] = DEFINED
        return r

    def merge_class(self, b: A.ClassDecl, r: A.ClassDecl):
        rm = {A.member_key(m): m for m in r.members}
        members = []
        for m in b.members:
            key = A.member_key(m)
            path = f"{b.name}.{key}"
            other = rm.get(key)
            try:
                if other is None:
                    members.append(self.copy_member(path, m))
                elif isinstance(m, A.FieldDecl):
                    if other != m:
                        _err(SIGNATURE_MISMATCH, f"field {path} is redeclared differently", other.loc)
                    members.append(self.copy_member(path, m))
                else:
                    members.append(self.member(path, m, other))
            except RefineError as e:
                self.diags.append(e.diagnostic())
                members.append(m)
        base_keys = {A.member_key(m) for m in b.members}
        new_fields = set()
        for m in r.members:
            if A.member_key(m) not in base_keys:
                members.append(m)
                self.extend_member(f"{b.name}.{A.member_key(m)}", m)
                if isinstance(m, A.FieldDecl):
                    new_fields.add(m.name)
        self.mm.new_fields[b.name] = new_fields
        return A.ClassDecl(b.name, tuple(members), b.loc)

    # -------------------------------------------------------------- members

    def member(self, path, b, r):
        if type(b) is not type(r) or getattr(b, "form", None) != getattr(r, "form", None) \
                or getattr(b, "is_predicate", None) != getattr(r, "is_predicate", None):
            _err(KIND_MISMATCH, f"{path} changes its kind of declaration", r.loc)
        rename = self.signature(path, b, r)
        if rename:
            b = _rename_member(b, rename)
        specs, delta = self.merge_specs(path, b, r)
        self.mm.spec_delta[path] = delta
        if isinstance(b, A.FunctionDecl):
            return self.merge_function(path, b, r, specs)
        return self.merge_method(path, b, r, specs)

    def signature(self, path, b, r) -> dict:
        if isinstance(b, A.FunctionDecl) and b.is_protected != r.is_protected:
            _err(SIGNATURE_MISMATCH, f"{path}: `protected` must match the refined declaration", r.loc)
        if r.sig_elided:
            return {}
        bp = list(b.params) + list(getattr(b, "outs", ()))
        rp = list(r.params) + list(getattr(r, "outs", ()))
        if len(b.params) != len(r.params) or len(bp) != len(rp) or any(x.type != y.type for x, y in zip(bp, rp)):
            _err(SIGNATURE_MISMATCH, f"{path}: repeated signature differs from the refined declaration", r.loc)
        if isinstance(b, A.FunctionDecl) and b.result != r.result:
            _err(SIGNATURE_MISMATCH, f"{path}: result type differs from the refined declaration", r.loc)
        return {x.name: y.name for x, y in zip(bp, rp) if x.name != y.name}

    def merge_specs(self, path, b, r):
        delta = SpecDelta()
        base_specs = list(b.specs)
        for s in base_specs:
            self.mm.provenance[id(s)] = Origin(INHERITED)
        b_dec = A.decreases_of(b)
        new_ens = []
        new_dec = None
        for s in r.specs:
            if isinstance(s, A.Requires):
                if s not in base_specs:
                    _err(ILLEGAL_REQUIRES_CHANGE, f"{path}: a refinement cannot change the precondition", s.loc)
            elif isinstance(s, (A.Modifies, A.Reads)):
                if s not in base_specs:
                    _err(ILLEGAL_FRAME_CHANGE, f"{path}: a refinement cannot change a frame specification", s.loc)
            elif isinstance(s, A.Ensures):
                if s not in base_specs and s not in new_ens:
                    new_ens.append(s)
            elif isinstance(s, A.Decreases):
                if b_dec is not None and s == b_dec:
                    continue
                if s.star or b_dec is None or not b_dec.star:
                    _err(ILLEGAL_DECREASES_CHANGE,
                         f"{path}: only `decreases *` may be replaced, and only by a termination metric", s.loc)
                new_dec = s
        delta.added_ensures = new_ens
        delta.decreases = new_dec
        for s in new_ens:
            self.mm.provenance[id(s)] = Origin(SUPERIMPOSED)
        if new_dec is not None:
            self.mm.provenance[id(new_dec)] = Origin(TIGHTENED, b_dec.loc)
        out = [new_dec if (isinstance(s, A.Decreases) and new_dec is not None) else s for s in base_specs]
        if new_ens:
            last = max((i for i, s in enumerate(out) if isinstance(s, (A.Ensures, A.Requires, A.Modifies, A.Reads))),
                       default=-1)
            out[last + 1:last + 1] = new_ens
        return tuple(out), delta

    def merge_function(self, path, b: A.FunctionDecl, r: A.FunctionDecl, specs):
        body = b.body
        origin = COPIED if (r.body is None and specs == b.specs) else REFINED
        conj = list(self.base.predicate_conjuncts.get(path, []))
        if r.body is not None:
            if b.body is None:
                origin = DEFINED
                body = r.body
                conj = [(self.ref.name, r.body)]
                _tag_tree(self.mm, r.body, Origin(SUPERIMPOSED))
            elif b.is_predicate:
                if not b.is_protected:
                    _err(STRENGTHENING_UNPROTECTED,
                         f"predicate {path} already has a body; only protected predicates may be strengthened",
                         r.body.loc if r.body.loc.file != "<builtin>" else r.loc)
                body = A.conjoin(A.conjuncts(b.body) + A.conjuncts(r.body), r.body.loc)
                conj.append((self.ref.name, r.body))
                self.mm.strengthened.add(path)
                self.mm.provenance[id(body)] = Origin(TIGHTENED, b.body.loc)
                for n in A.walk(body):
                    if isinstance(n, A.Binary) and n.op == "&&" and id(n) not in self.mm.provenance:
                        self.mm.provenance[id(n)] = Origin(TIGHTENED, b.body.loc)
                _tag_tree(self.mm, b.body, Origin(INHERITED))
                _tag_tree(self.mm, r.body, Origin(SUPERIMPOSED))
            else:
                _err(ILLEGAL_BODY_CHANGE, f"function {path} already has a body", r.loc)
        elif body is not None:
            _tag_tree(self.mm, body, Origin(INHERITED))
        if conj:
            self.mm.predicate_conjuncts[path] = conj
        self.mm.member_origin[path] = origin
        return replace(b, specs=specs, body=body, sig_elided=False)

    def merge_method(self, path, b: A.MethodDecl, r: A.MethodDecl, specs):
        if r.body is None:
            self.mm.member_origin[path] = COPIED if specs == b.specs else REFINED
            if b.body is not None:
                for n in A.walk(b.body):
                    if isinstance(n, (A.Stmt, A.Expr)):
                        self.mm.provenance[id(n)] = Origin(INHERITED)
            return replace(b, specs=specs, sig_elided=False)
        if b.body is None:
            self.mm.member_origin[path] = DEFINED
            _tag_tree(self.mm, r.body, Origin(SUPERIMPOSED))
            _mark_defined(self.mm, r.body)
            return replace(b, specs=specs, body=r.body, sig_elided=False)
        self.mm.member_origin[path] = REFINED
        align = Alignment()
        self.mm.alignments[path] = align
        body = StatementMerger(self.mm, align, _declared_names(b)).block(b.body, r.body)
        return replace(b, specs=specs, body=body, sig_elided=False)


def _rename_member(b, rename: dict):
    mapping = {old: A.Name(new) for old, new in rename.items()}
    params = tuple(A.Param(rename.get(p.name, p.name), p.type, p.loc) for p in b.params)
    specs = tuple(A.substitute(s, mapping) for s in b.specs)
    body = A.substitute(b.body, mapping) if b.body is not None else None
    if isinstance(b, A.MethodDecl):
        outs = tuple(A.Param(rename.get(p.name, p.name), p.type, p.loc) for p in b.outs)
        body = _rename_decls(body, rename) if body is not None else None
        return replace(b, params=params, outs=outs, specs=specs, body=body)
    return replace(b, params=params, specs=specs, body=body)


def _rename_decls(body, rename):
    def fn(n):
        if isinstance(n, A.VarDecl) and any(x in rename for x in n.names):
            return replace(n, names=tuple(rename.get(x, x) for x in n.names))
        return None

    return A.transform(body, fn)


def _declared_names(m: A.MethodDecl) -> set:
    """Variables a skeleton may tighten: in/out-parameters and all locals of the base body."""
    names = {p.name for p in m.params} | {p.name for p in m.outs}
    if m.body is not None:
        for n in A.walk(m.body):
            if isinstance(n, A.VarDecl):
                names.update(n.names)
    return names


# ------------------------------------------------------------------ statements


def _lhs_names(lhs) -> Optional[tuple]:
    if all(isinstance(e, A.Name) for e in lhs):
        return tuple(e.name for e in lhs)
    return None


def _assign_target(s) -> Optional[tuple]:
    """(names, kind) for a skeleton statement that could tighten an assign-such-that."""
    if isinstance(s, (A.Assign, A.AssignSuchThat)):
        names = _lhs_names(s.lhs)
        return names
    if isinstance(s, A.VarDecl) and isinstance(s.init, (A.Assign, A.AssignSuchThat)):
        return tuple(s.names)
    return None


def _such_that_target(b) -> Optional[tuple]:
    if isinstance(b, A.AssignSuchThat):
        return _lhs_names(b.lhs)
    if isinstance(b, A.VarDecl) and isinstance(b.init, A.AssignSuchThat):
        return tuple(b.names)
    return None


def _guard_compatible(skel_guard, base_guard) -> bool:
    if isinstance(skel_guard, A.Elided):
        return True
    if isinstance(base_guard, A.Star):
        return True
    return skel_guard == base_guard


class StatementMerger:
    def __init__(self, mm: MergedModule, align: Alignment, declared: set):
        self.mm = mm
        self.align = align
        self.declared = declared

    # classification ------------------------------------------------------

    def matchable(self, s, b) -> bool:
        if isinstance(s, A.If):
            return isinstance(b, A.If) and _guard_compatible(s.guard, b.guard)
        if isinstance(s, A.While):
            return isinstance(b, A.While) and _guard_compatible(s.guard, b.guard)
        if isinstance(s, A.Assert):
            if not isinstance(b, (A.Assume, A.Assert)):
                return False
            return isinstance(s.cond, A.Elided) or s.cond == b.cond
        if isinstance(s, A.Modify):
            if not isinstance(b, A.Modify) or s.body is None:
                return False
            return isinstance(s.frame, A.Elided) or s.frame == b.frame
        if isinstance(s, A.Labeled):
            return isinstance(b, A.Labeled) and b.label == s.label
        names = _assign_target(s)
        if names is not None and self.tightens(names):
            return _such_that_target(b) == names
        return False

    def tightens(self, names) -> bool:
        return any(n in self.declared for n in names)

    def must_match(self, s) -> bool:
        if isinstance(s, (A.If, A.While)):
            return isinstance(s.guard, A.Elided)
        if isinstance(s, A.Assert):
            return isinstance(s.cond, A.Elided)
        if isinstance(s, A.Modify):
            return isinstance(s.frame, A.Elided)
        return False

    # merging --------------------------------------------------------------

    def block(self, base: A.Block, skel: A.Block) -> A.Block:
        return A.Block(tuple(self.stmts(list(base.stmts), list(skel.stmts))), base.loc)

    def stmts(self, base: list, skel: list) -> list:
        out = []
        i = 0
        pending: Optional[A.Elision] = None
        for s in skel:
            if isinstance(s, A.Elision):
                pending = pending or s
                continue
            if pending is not None:
                j = next((k for k in range(i, len(base)) if self.matchable(s, base[k])), None)
                if j is None:
                    self.unmatched(s, base, i)
                    self.absorb(pending, base[i:], out)
                    i = len(base)
                    self.insert(s, out)
                else:
                    self.absorb(pending, base[i:j], out)
                    out.append(self.match(s, base[j]))
                    i = j + 1
                pending = None
            elif i < len(base) and self.matchable(s, base[i]):
                out.append(self.match(s, base[i]))
                i += 1
            else:
                self.unmatched(s, base, i)
                self.insert(s, out)
        self.absorb(pending, base[i:], out)
        return out

    def unmatched(self, s, base, i):
        earlier = any(self.matchable(s, b) for b in base[:i])
        if self.must_match(s):
            if earlier:
                _err(ORDER_VIOLATION, "skeleton statement would match an earlier statement of the refined body", s.loc)
            _err(MERGE_MISMATCH, "skeleton statement with elided parts matches no statement of the refined body", s.loc)

    def absorb(self, elision, stmts, out):
        if not stmts:
            return
        self.align.add("absorb", elision, list(stmts))
        for b in stmts:
            self.inherit(b)
            out.append(b)

    def inherit(self, b):
        for n in A.walk(b):
            if isinstance(n, (A.Stmt, A.Expr)):
                self.mm.provenance.setdefault(id(n), Origin(INHERITED))

    def insert(self, s, out):
        self.align.add("insert", s)
        _tag_tree(self.mm, s, Origin(SUPERIMPOSED))
        for n in A.walk(s):
            if isinstance(n, A.Return):
                self.mm.superimposed_returns.append(n)
        out.append(s)

    def match(self, s, b):
        self.align.add("match", s, b)
        mm = self.mm
        if isinstance(s, A.If):
            guard = b.guard
            origin = Origin(INHERITED)
            if not isinstance(s.guard, A.Elided) and isinstance(b.guard, A.Star):
                guard = s.guard
                origin = Origin(TIGHTENED, b.loc)
                _tag_tree(mm, guard, Origin(TIGHTENED, b.loc))
            then = self.block(b.then, s.then)
            if s.else_ is None:
                else_ = b.else_
                if else_ is not None:
                    self.inherit(else_)
            else:
                else_ = self.block(b.else_ if b.else_ is not None else A.Block((), b.loc), s.else_)
            node = A.If(guard, then, else_, b.loc)
            mm.provenance[id(node)] = origin
            mm._keep.append(node)
            return node
        if isinstance(s, A.While):
            guard = b.guard
            origin = Origin(INHERITED)
            if not isinstance(s.guard, A.Elided) and isinstance(b.guard, A.Star):
                guard = s.guard
                origin = Origin(TIGHTENED, b.loc)
            for inv in b.invariants:
                self.inherit(inv)
            added = [inv for inv in s.invariants if inv not in b.invariants]
            for inv in added:
                _tag_tree(mm, inv, Origin(SUPERIMPOSED))
            decreases = b.decreases
            if s.decreases and s.decreases != b.decreases:
                if b.decreases:
                    _err(ILLEGAL_DECREASES_CHANGE, "a loop's termination metric cannot be replaced", s.loc)
                decreases = s.decreases
            body = self.block(b.body, s.body)
            node = A.While(guard, tuple(b.invariants) + tuple(added), body, decreases, b.loc)
            mm.provenance[id(node)] = origin
            mm.new_invariants[id(node)] = added
            if decreases is not b.decreases:
                mm.new_decreases.add(id(node))
            mm._keep.append(node)
            return node
        if isinstance(s, A.Assert):
            if isinstance(b, A.Assert):
                self.inherit(b)
                return b
            node = A.Assert(b.cond, s.loc)
            self.inherit(b.cond)
            mm.provenance[id(node)] = Origin(TIGHTENED, b.loc)
            mm.assume_to_assert[id(node)] = b
            mm._keep.append(node)
            return node
        if isinstance(s, A.Modify):
            frame = b.frame
            for e in frame:
                self.inherit(e)
            if b.body is None:
                body = s.body
                _tag_tree(mm, body, Origin(SUPERIMPOSED))
                _mark_defined(mm, body)
                origin = Origin(TIGHTENED, b.loc)
            else:
                body = self.block(b.body, s.body)
                origin = Origin(INHERITED)
            node = A.Modify(frame, body, b.loc)
            mm.provenance[id(node)] = origin
            mm._keep.append(node)
            return node
        if isinstance(s, A.Labeled):
            if self.matchable(s.stmt, b.stmt):
                inner = self.match(s.stmt, b.stmt)
            elif isinstance(s.stmt, A.Block) and isinstance(b.stmt, A.Block):
                inner = self.block(b.stmt, s.stmt)
            else:
                _err(MERGE_MISMATCH, f"labeled statement {s.label} does not match the refined body", s.loc)
            node = A.Labeled(b.label, inner, b.loc)
            mm.provenance[id(node)] = Origin(INHERITED)
            mm._keep.append(node)
            return node
        # tighten-up of an assign-such-that
        node = s
        if isinstance(s, A.VarDecl) and isinstance(b, A.VarDecl):
            if s.ghost != b.ghost:
                _err(SIGNATURE_MISMATCH, "tightened declaration must keep the ghost-ness of the refined one", s.loc)
            types = tuple(st if st is not None else bt for st, bt in zip(s.types, b.types))
            node = replace(s, types=types)
        elif isinstance(s, A.VarDecl) or isinstance(b, A.VarDecl):
            _err(MERGE_MISMATCH, "a declaration can only be tightened by a declaration", s.loc)
        _tag_tree(mm, node, Origin(TIGHTENED, b.loc))
        mm.tightened[id(node)] = b
        return node


# ------------------------------------------------------------------ legality


def _field_names_of(module: A.ModuleDecl) -> dict:
    return {d.name: {f.name for f in d.fields} for d in module.decls if isinstance(d, A.ClassDecl)}


def check_new_state(mm: MergedModule) -> list:
    """Superimposed code may assign only state introduced by this refinement step."""
    diags = []
    if mm.base is None:
        return diags
    new_fields = set()
    for names in mm.new_fields.values():
        new_fields |= names
    for path, decl, cls in mm.members():
        if not isinstance(decl, A.MethodDecl) or decl.body is None:
            continue
        if mm.member_origin.get(path) in (EXTENDED, DEFINED):
            continue
        outs = {p.name for p in decl.outs}
        cls_fields = {f.name for f in cls.fields} if cls is not None else set()
        new_locals: set = set()
        _NewState(mm, new_fields, cls_fields, outs, new_locals, diags).stmt(decl.body, False)
    return diags


class _NewState:
    def __init__(self, mm, new_fields, cls_fields, outs, new_locals, diags):
        self.mm = mm
        self.new_fields = new_fields
        self.cls_fields = cls_fields
        self.outs = outs
        self.new_locals = new_locals
        self.diags = diags

    def superimposed(self, s) -> bool:
        o = self.mm.origin(s)
        return o is not None and o.kind == SUPERIMPOSED and id(s) not in self.mm.defined_regions

    def target_ok(self, e) -> Optional[str]:
        if isinstance(e, A.Name):
            if e.name in self.new_locals:
                return None
            if e.name in self.cls_fields and e.name in self.new_fields:
                return None
            if e.name in self.outs:
                return f"output parameter {e.name} may be assigned by superimposed code only through a return"
            return f"{e.name} was declared in the refined module"
        if isinstance(e, A.Field):
            if e.name in self.new_fields:
                return None
            return f"field {e.name} was declared in the refined module"
        return "unsupported assignment target"

    def check(self, s, targets):
        for t in targets:
            why = self.target_ok(t)
            if why:
                self.diags.append(Diagnostic(
                    ERROR, NEW_STATE_VIOLATION, f"superimposed assignment violates the New State Principle: {why}", s.loc))
                return

    def stmt(self, s, inside_new: bool):
        new = inside_new or self.superimposed(s)
        if new and id(s) not in self.mm.defined_regions:
            if isinstance(s, A.VarDecl):
                self.new_locals.update(s.names)
            elif isinstance(s, (A.Assign, A.AssignSuchThat)):
                self.check(s, s.lhs)
            elif isinstance(s, A.New):
                self.check(s, (s.lhs,))
            elif isinstance(s, A.Call):
                self.check(s, s.lhs)
        for k in _sub_statements(s):
            self.stmt(k, new)


def _sub_statements(s):
    if isinstance(s, A.Block):
        return s.stmts
    if isinstance(s, A.If):
        return (s.then,) + ((s.else_,) if s.else_ is not None else ())
    if isinstance(s, A.While):
        return (s.body,)
    if isinstance(s, A.Modify):
        return (s.body,) if s.body is not None else ()
    if isinstance(s, A.Labeled):
        return (s.stmt,)
    return ()


def check_control_flow(mm: MergedModule) -> list:
    diags = []
    if mm.base is None:
        return diags
    for path, decl, _ in mm.members():
        if not isinstance(decl, A.MethodDecl) or decl.body is None:
            continue
        if mm.member_origin.get(path) in (EXTENDED, DEFINED):
            continue
        _check_breaks(mm, decl.body, None, diags)
    return diags


def _check_breaks(mm: MergedModule, s, loop, diags):
    """A superimposed break is legal only when the loop it exits is itself superimposed."""
    if isinstance(s, A.Break):
        o = mm.origin(s)
        if o is not None and o.kind == SUPERIMPOSED and id(s) not in mm.defined_regions:
            lo = mm.origin(loop) if loop is not None else None
            if lo is None or lo.kind != SUPERIMPOSED:
                diags.append(Diagnostic(ERROR, ILLEGAL_BREAK,
                                        "a refinement may not add break statements to inherited loops", s.loc))
        return
    if isinstance(s, A.While):
        loop = s
    for k in _sub_statements(s):
        _check_breaks(mm, k, loop, diags)


# ------------------------------------------------------------------ API


def merge_module(base: MergedModule, refining: A.ModuleDecl, graph=None, lookup=None):
    """Return (MergedModule, diagnostics)."""
    m = Merger(base, refining, graph, lookup)
    mm = m.run()
    diags = list(m.diags)
    if not diags:
        diags += check_new_state(mm)
        diags += check_control_flow(mm)
    return mm, diags


def merge_statements(base_body: A.Block, skeleton: A.Block, declared: Optional[set] = None):
    """Standalone body merge: returns (merged Block, Alignment, MergedModule holding provenance)."""
    mm = MergedModule(module=A.ModuleDecl("<body>"))
    align = Alignment()
    names = set(declared or ())
    for n in A.walk(base_body):
        if isinstance(n, A.VarDecl):
            names.update(n.names)
    return StatementMerger(mm, align, names).block(base_body, skeleton), align, mm


def merge_specs(base_member, refining_member):
    mm = MergedModule(module=A.ModuleDecl("<specs>"))
    merger = Merger(mm, A.ModuleDecl("<specs>"))
    merger.mm = mm
    return merger.merge_specs(A.member_key(base_member), base_member, refining_member)


def merge_predicate_bodies(base_pred: A.FunctionDecl, refining_pred: A.FunctionDecl) -> A.FunctionDecl:
    if base_pred.body is None:
        return replace(base_pred, body=refining_pred.body)
    if refining_pred.body is None:
        return base_pred
    if not base_pred.is_protected:
        _err(STRENGTHENING_UNPROTECTED, f"predicate {base_pred.name} is not protected", refining_pred.loc)
    return replace(base_pred, body=A.conjoin(A.conjuncts(base_pred.body) + A.conjuncts(refining_pred.body),
                                             refining_pred.loc))

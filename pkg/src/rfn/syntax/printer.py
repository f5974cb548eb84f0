"""Deterministic pretty-printer; `parse(print(m))` is structurally equal to `m`."""

from __future__ import annotations

from typing import Callable, Optional

from . import ast as A

INDENT = "  "

_BINARY_PREC = {
    "==>": 0,
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3, "in": 3, "!in": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5, "%": 5,
}
_UNARY_PREC = 6
_POSTFIX_PREC = 7
_LOOSE_PREC = -1  # if-then-else, match


def _prec(e) -> int:
    if isinstance(e, A.Binary):
        return _BINARY_PREC[e.op]
    if isinstance(e, A.Chain):
        return 3
    if isinstance(e, A.Unary):
        return _UNARY_PREC
    if isinstance(e, (A.Ite, A.Match)):
        return _LOOSE_PREC
    return _POSTFIX_PREC


def expr_str(e, ctx: int = _LOOSE_PREC) -> str:
    s = _expr(e)
    if _prec(e) < ctx:
        return f"({s})"
    return s


def _expr(e) -> str:
    if isinstance(e, A.IntLit):
        return str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.NullLit):
        return "null"
    if isinstance(e, A.This):
        return "this"
    if isinstance(e, A.Name):
        return e.name
    if isinstance(e, A.Field):
        return f"{expr_str(e.obj, _POSTFIX_PREC)}.{e.name}"
    if isinstance(e, A.Unary):
        return f"{e.op}{expr_str(e.operand, _UNARY_PREC)}"
    if isinstance(e, A.Binary):
        p = _BINARY_PREC[e.op]
        if e.op == "==>":
            left, right = expr_str(e.left, p + 1), expr_str(e.right, p)
        elif p == 3:
            left, right = expr_str(e.left, p + 1), expr_str(e.right, p + 1)
        else:
            left, right = expr_str(e.left, p), expr_str(e.right, p + 1)
        return f"{left} {e.op} {right}"
    if isinstance(e, A.Chain):
        parts = [expr_str(e.operands[0], 4)]
        for op, operand in zip(e.ops, e.operands[1:]):
            parts.append(op)
            parts.append(expr_str(operand, 4))
        return " ".join(parts)
    if isinstance(e, A.Ite):
        return f"if {expr_str(e.cond)} then {expr_str(e.then)} else {expr_str(e.else_)}"
    if isinstance(e, A.Match):
        out = [f"match {expr_str(e.scrutinee)}"]
        for i, c in enumerate(e.cases):
            pat = c.ctor + (f"({', '.join(c.vars)})" if c.vars else "")
            last = i == len(e.cases) - 1
            body = expr_str(c.body, _LOOSE_PREC if last else 0)
            out.append(f"case {pat} => {body}")
        return " ".join(out)
    if isinstance(e, A.SetDisplay):
        return "{" + ", ".join(expr_str(x) for x in e.elems) + "}"
    if isinstance(e, A.SeqDisplay):
        return "[" + ", ".join(expr_str(x) for x in e.elems) + "]"
    if isinstance(e, A.Length):
        return f"|{expr_str(e.operand)}|"
    if isinstance(e, A.Index):
        return f"{expr_str(e.seq, _POSTFIX_PREC)}[{expr_str(e.index)}]"
    if isinstance(e, A.Old):
        return f"old({expr_str(e.operand)})"
    if isinstance(e, A.Fresh):
        return f"fresh({expr_str(e.operand)})"
    if isinstance(e, A.Apply):
        return f"{expr_str(e.callee, _POSTFIX_PREC)}({', '.join(expr_str(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def exprs_str(es) -> str:
    return ", ".join(expr_str(e) for e in es)


def guard_str(g) -> str:
    if isinstance(g, A.Star):
        return "*"
    if isinstance(g, A.Elided):
        return "..."
    return expr_str(g)


def type_str(t: Optional[A.TypeRef]) -> str:
    return str(t)


def _params(ps) -> str:
    return ", ".join(f"{p.name}: {p.type}" for p in ps)


Marker = Callable[[object], str]


class Printer:
    """Accumulates (marker, text) lines; `marker(node)` tags statement lines for provenance."""

    def __init__(self, marker: Optional[Marker] = None):
        self.marker = marker
        self.lines: list = []
        self.last_tag = ""

    def emit(self, depth: int, text: str, node=None) -> None:
        tag = ""
        if self.marker is not None:
            tag = (self.marker(node) if node is not None else "") or self.last_tag
            self.last_tag = tag
        self.lines.append((tag, INDENT * depth + text))

    def render(self) -> str:
        if self.marker is None:
            return "".join(text + "\n" for _, text in self.lines)
        return "".join(f"{tag or ' '} {text}".rstrip() + "\n" for tag, text in self.lines)

    # ------------------------------------------------------------ declarations

    def module(self, m: A.ModuleDecl) -> None:
        head = ("abstract " if m.is_abstract else "") + f"module {m.name}"
        if m.refines:
            head += f" refines {m.refines}"
        self.emit(0, head + " {", m)
        for d in m.decls:
            self.decl(d, 1)
        self.emit(0, "}", m)

    def decl(self, d, depth: int) -> None:
        if isinstance(d, A.ImportDecl):
            if d.mode == "eq":
                text = f"import {d.name}" if d.name == d.target else f"import {d.name} = {d.target}"
            elif d.mode == "as":
                text = f"import {d.name} as {d.target}"
            else:
                text = f"import {d.name} as {d.target} default {d.default}"
            self.emit(depth, text, d)
        elif isinstance(d, A.TypeDecl):
            if d.form == "opaque":
                self.emit(depth, f"type {d.name}", d)
            elif d.form == "synonym":
                self.emit(depth, f"type {d.name} = {d.synonym}", d)
            else:
                ctors = " | ".join(
                    c.name + (f"({', '.join(str(t) for t in c.arg_types)})" if c.arg_types else "")
                    for c in d.ctors
                )
                self.emit(depth, f"datatype {d.name} = {ctors}", d)
        elif isinstance(d, A.FieldDecl):
            self.emit(depth, ("ghost " if d.ghost else "") + f"var {d.name}: {d.type}", d)
        elif isinstance(d, A.ClassDecl):
            self.emit(depth, f"class {d.name} {{", d)
            for m in d.members:
                self.decl(m, depth + 1)
            self.emit(depth, "}", d)
        elif isinstance(d, A.FunctionDecl):
            head = ("protected " if d.is_protected else "") + ("predicate " if d.is_predicate else "function ")
            head += d.name
            if d.sig_elided:
                head += "..."
            else:
                head += f"({_params(d.params)})"
                if not d.is_predicate or d.result != A.BOOL:
                    head += f": {d.result}"
            self.emit(depth, head, d)
            self.specs(d, depth + 1)
            if d.body is not None:
                self.emit(depth, "{", d)
                self.emit(depth + 1, expr_str(d.body), d.body)
                self.emit(depth, "}", d)
        elif isinstance(d, A.MethodDecl):
            head = d.form
            if d.name:
                head += f" {d.name}"
            if d.sig_elided:
                head += "..." if d.name else " ..."
            else:
                head += f"({_params(d.params)})" if d.name else f" ({_params(d.params)})"
                if d.outs:
                    head += f" returns ({_params(d.outs)})"
            self.emit(depth, head, d)
            self.specs(d, depth + 1)
            if d.body is not None:
                self.block_lines(d.body, depth, d)
        else:
            raise TypeError(f"not a declaration: {d!r}")

    def specs(self, d, depth: int) -> None:
        for s in d.specs:
            if isinstance(s, A.Requires):
                self.emit(depth, f"requires {expr_str(s.expr)}", s)
            elif isinstance(s, A.Ensures):
                self.emit(depth, f"ensures {expr_str(s.expr)}", s)
            elif isinstance(s, A.Modifies):
                self.emit(depth, f"modifies {exprs_str(s.frame)}", s)
            elif isinstance(s, A.Reads):
                self.emit(depth, f"reads {exprs_str(s.frame)}", s)
            elif isinstance(s, A.Decreases):
                self.emit(depth, "decreases *" if s.star else f"decreases {exprs_str(s.exprs)}", s)

    # ------------------------------------------------------------ statements

    def block_lines(self, b: A.Block, depth: int, owner) -> None:
        self.emit(depth, "{", owner)
        for s in b.stmts:
            self.stmt(s, depth + 1)
        self.emit(depth, "}", owner)

    def stmt(self, s, depth: int, prefix: str = "") -> None:
        if isinstance(s, A.Block):
            self.emit(depth, prefix + "{", s)
            for x in s.stmts:
                self.stmt(x, depth + 1)
            self.emit(depth, "}", s)
        elif isinstance(s, A.If):
            self._if(s, depth, prefix)
        elif isinstance(s, A.While):
            head = prefix + f"while {guard_str(s.guard)}"
            if not s.invariants and not s.decreases:
                self.emit(depth, head + " {", s)
            else:
                self.emit(depth, head, s)
                for inv in s.invariants:
                    self.emit(depth + 1, f"invariant {expr_str(inv)}", inv)
                if s.decreases:
                    self.emit(depth + 1, f"decreases {exprs_str(s.decreases)}", s)
                self.emit(depth, "{", s)
            for x in s.body.stmts:
                self.stmt(x, depth + 1)
            self.emit(depth, "}", s)
        elif isinstance(s, A.Modify):
            frame = "..." if isinstance(s.frame, A.Elided) else exprs_str(s.frame)
            if s.body is None:
                self.emit(depth, prefix + f"modify {frame};", s)
            else:
                self.emit(depth, prefix + f"modify {frame} {{", s)
                for x in s.body.stmts:
                    self.stmt(x, depth + 1)
                self.emit(depth, "}", s)
        elif isinstance(s, A.Labeled):
            self.stmt(s.stmt, depth, prefix + f"label {s.label}: ")
        else:
            self.emit(depth, prefix + simple_stmt_str(s), s)

    def _if(self, s: A.If, depth: int, prefix: str) -> None:
        self.emit(depth, prefix + f"if {guard_str(s.guard)} {{", s)
        cur = s
        while True:
            for x in cur.then.stmts:
                self.stmt(x, depth + 1)
            els = cur.else_
            if els is None:
                self.emit(depth, "}", cur)
                return
            if len(els.stmts) == 1 and isinstance(els.stmts[0], A.If):
                cur = els.stmts[0]
                self.emit(depth, f"}} else if {guard_str(cur.guard)} {{", cur)
                continue
            self.emit(depth, "} else {", cur)
            for x in els.stmts:
                self.stmt(x, depth + 1)
            self.emit(depth, "}", cur)
            return


def _rhs_str(init) -> str:
    if isinstance(init, A.Assign):
        return f" := {exprs_str(init.rhs)}"
    if isinstance(init, A.AssignSuchThat):
        return f" :| {'assume ' if init.assume else ''}{expr_str(init.cond)}"
    if isinstance(init, A.New):
        return f" := new {init.cls}({exprs_str(init.args)})"
    if isinstance(init, A.Call):
        return f" := {expr_str(init.callee, _POSTFIX_PREC)}({exprs_str(init.args)})"
    raise TypeError(init)


def simple_stmt_str(s) -> str:
    if isinstance(s, A.VarDecl):
        names = ", ".join(n if t is None else f"{n}: {t}" for n, t in zip(s.names, s.types))
        text = ("ghost " if s.ghost else "") + f"var {names}"
        if s.init is not None:
            text += _rhs_str(s.init)
        return text + ";"
    if isinstance(s, (A.Assign, A.AssignSuchThat)):
        return exprs_str(s.lhs) + _rhs_str(s) + ";"
    if isinstance(s, A.New):
        return expr_str(s.lhs) + _rhs_str(s) + ";"
    if isinstance(s, A.Call):
        call = f"{expr_str(s.callee, _POSTFIX_PREC)}({exprs_str(s.args)})"
        return (f"{exprs_str(s.lhs)} := {call};") if s.lhs else call + ";"
    if isinstance(s, A.Assert):
        return "assert ...;" if isinstance(s.cond, A.Elided) else f"assert {expr_str(s.cond)};"
    if isinstance(s, A.Assume):
        return f"assume {expr_str(s.cond)};"
    if isinstance(s, A.Return):
        return f"return {exprs_str(s.values)};" if s.values else "return;"
    if isinstance(s, A.Break):
        return "break;"
    if isinstance(s, A.Elision):
        return "...;"
    raise TypeError(f"not a simple statement: {s!r}")


def pretty_print(module: A.ModuleDecl, marker: Optional[Marker] = None) -> str:
    p = Printer(marker)
    p.module(module)
    return p.render()


def print_program(program: A.SourceProgram) -> str:
    return "\n".join(pretty_print(m) for m in program.modules)

"""Recursive-descent parser producing the AST in `ast.py`.

Expression precedence, loosest first::

    ==>  (right associative)
    ||
    &&
    == != < <= > >= in !in   (comparisons chain: `lo <= p < hi`)
    + -
    * / %
    ! -  (prefix)
    .f  f(args)  s[i]
"""

from __future__ import annotations

from typing import Optional

from ..diagnostics import ParseError, SourceLocation
from . import ast as A
from .lexer import EOF, IDENT, INT, KW, SYM, Token, tokenize

COMPARISONS = ("==", "!=", "<", "<=", ">", ">=", "in", "!in")
ASCENDING = {"==", "<", "<="}
DESCENDING = {"==", ">", ">="}
SPEC_KEYWORDS = ("requires", "ensures", "modifies", "reads", "decreases")


class Parser:
    def __init__(self, tokens: list, filename: str = "<input>"):
        self.tokens = list(tokens)
        end = self.tokens[-1].loc if self.tokens else SourceLocation(filename, 1, 1)
        self.tokens.append(Token(EOF, "<eof>", end))
        self.pos = 0

    # ------------------------------------------------------------ cursor helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.is_(text)

    def advance(self) -> Token:
        t = self.tok
        if t.kind != EOF:
            self.pos += 1
        return t

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != IDENT:
            self.fail("expected identifier")
        return self.advance()

    def fail(self, hint: str):
        t = self.tok
        found = "end of input" if t.kind == EOF else repr(t.text)
        raise ParseError(f"{hint}, found {found}", t.loc)

    # ------------------------------------------------------------ program

    def program(self) -> A.SourceProgram:
        mods = []
        while self.tok.kind != EOF:
            mods.append(self.module())
        return A.SourceProgram(tuple(mods))

    def module(self) -> A.ModuleDecl:
        start = self.tok.loc
        is_abstract = bool(self.accept("abstract"))
        self.expect("module")
        name = self.ident().text
        refines = None
        if self.accept("refines"):
            refines = self.ident().text
        self.expect("{")
        decls = []
        while not self.at("}"):
            if self.tok.kind == EOF:
                self.fail("expected '}' to close module")
            decls.append(self.top_decl(in_class=False))
        self.expect("}")
        return A.ModuleDecl(name, is_abstract, refines, tuple(decls), start)

    def top_decl(self, in_class: bool):
        t = self.tok
        if t.is_("import") and not in_class:
            return self.import_decl()
        if t.is_("type") and not in_class:
            return self.type_decl()
        if t.is_("datatype") and not in_class:
            return self.datatype_decl()
        if t.is_("class") and not in_class:
            return self.class_decl()
        if t.is_("protected") or t.is_("function") or t.is_("predicate"):
            return self.function_decl()
        if t.is_("method") or t.is_("lemma") or t.is_("constructor"):
            return self.method_decl()
        if in_class and (t.is_("var") or (t.is_("ghost") and self.peek().is_("var"))):
            return self.field_decl()
        self.fail("expected a declaration")

    def import_decl(self) -> A.ImportDecl:
        start = self.expect("import").loc
        local = self.ident().text
        if self.accept("="):
            return A.ImportDecl(local, "eq", self.ident().text, None, start)
        if self.accept("as"):
            target = self.ident().text
            if self.accept("default"):
                return A.ImportDecl(local, "default", target, self.ident().text, start)
            return A.ImportDecl(local, "as", target, None, start)
        return A.ImportDecl(local, "eq", local, None, start)

    def type_decl(self) -> A.TypeDecl:
        start = self.expect("type").loc
        name = self.ident().text
        if self.accept("="):
            return A.TypeDecl(name, "synonym", self.type_ref(), (), start)
        return A.TypeDecl(name, "opaque", None, (), start)

    def datatype_decl(self) -> A.TypeDecl:
        start = self.expect("datatype").loc
        name = self.ident().text
        self.expect("=")
        ctors = [self.ctor()]
        while self.accept("|"):
            ctors.append(self.ctor())
        return A.TypeDecl(name, "datatype", None, tuple(ctors), start)

    def ctor(self) -> A.Ctor:
        t = self.ident()
        args = []
        if self.accept("("):
            if not self.at(")"):
                args.append(self.type_ref())
                while self.accept(","):
                    args.append(self.type_ref())
            self.expect(")")
        return A.Ctor(t.text, tuple(args), t.loc)

    def class_decl(self) -> A.ClassDecl:
        start = self.expect("class").loc
        name = self.ident().text
        self.expect("{")
        members = []
        while not self.at("}"):
            if self.tok.kind == EOF:
                self.fail("expected '}' to close class")
            members.append(self.top_decl(in_class=True))
        self.expect("}")
        return A.ClassDecl(name, tuple(members), start)

    def field_decl(self) -> A.FieldDecl:
        start = self.tok.loc
        ghost = bool(self.accept("ghost"))
        self.expect("var")
        name = self.ident().text
        self.expect(":")
        return A.FieldDecl(name, self.type_ref(), ghost, start)

    def params(self) -> tuple:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.param())
            while self.accept(","):
                out.append(self.param())
        self.expect(")")
        return tuple(out)

    def param(self) -> A.Param:
        t = self.ident()
        self.expect(":")
        return A.Param(t.text, self.type_ref(), t.loc)

    def function_decl(self) -> A.FunctionDecl:
        start = self.tok.loc
        protected = bool(self.accept("protected"))
        is_pred = bool(self.accept("predicate"))
        if not is_pred:
            self.expect("function")
        name = self.ident().text
        params: tuple = ()
        result = A.BOOL if is_pred else None
        elided = False
        if self.accept("..."):
            elided = True
        else:
            params = self.params()
            if not is_pred:
                self.expect(":")
                result = self.type_ref()
            elif self.accept(":"):
                result = self.type_ref()
        specs = self.specs()
        body = None
        if self.accept("{"):
            body = self.expr()
            self.expect("}")
        return A.FunctionDecl(name, is_pred, protected, params, result, specs, body, elided, start)

    def method_decl(self) -> A.MethodDecl:
        start = self.tok.loc
        form = self.advance().text
        name = ""
        if form != "constructor":
            name = self.ident().text
        elif self.tok.kind == IDENT:
            name = self.advance().text
        params: tuple = ()
        outs: tuple = ()
        elided = False
        if self.accept("..."):
            elided = True
        else:
            params = self.params()
            if form != "constructor" and self.accept("returns"):
                outs = self.params()
        specs = self.specs()
        body = None
        if self.at("{"):
            body = self.block()
        return A.MethodDecl(name, form, params, outs, specs, body, elided, start)

    def specs(self) -> tuple:
        out = []
        while True:
            t = self.tok
            if t.is_("requires"):
                self.advance()
                out.append(A.Requires(self.expr(), t.loc))
            elif t.is_("ensures"):
                self.advance()
                out.append(A.Ensures(self.expr(), t.loc))
            elif t.is_("modifies"):
                self.advance()
                out.append(A.Modifies(self.expr_list(), t.loc))
            elif t.is_("reads"):
                self.advance()
                out.append(A.Reads(self.expr_list(), t.loc))
            elif t.is_("decreases"):
                self.advance()
                out.append(self.decreases_rest(t.loc))
            else:
                return tuple(out)

    def decreases_rest(self, loc) -> A.Decreases:
        if self.accept("*"):
            return A.Decreases(True, (), loc)
        return A.Decreases(False, self.expr_list(), loc)

    # ------------------------------------------------------------ types

    def type_ref(self) -> A.TypeRef:
        t = self.tok
        if t.is_("int") or t.is_("bool") or t.is_("object"):
            self.advance()
            return A.TypeRef(t.text, (), t.loc)
        if t.is_("set") or t.is_("seq"):
            self.advance()
            self.expect("<")
            arg = self.type_ref()
            self.expect(">")
            return A.TypeRef(t.text, (arg,), t.loc)
        name = self.ident().text
        while self.at(".") and self.peek().kind == IDENT:
            self.advance()
            name += "." + self.advance().text
        return A.TypeRef(name, (), t.loc)

    # ------------------------------------------------------------ statements

    def block(self) -> A.Block:
        start = self.expect("{").loc
        stmts = []
        while not self.at("}"):
            if self.tok.kind == EOF:
                self.fail("expected '}' to close block")
            stmts.append(self.stmt())
        self.expect("}")
        return A.Block(tuple(stmts), start)

    def stmt(self) -> A.Stmt:
        t = self.tok
        if t.is_("{"):
            return self.block()
        if t.is_("..."):
            self.advance()
            self.expect(";")
            return A.Elision(t.loc)
        if t.is_("var") or (t.is_("ghost") and self.peek().is_("var")):
            return self.var_decl()
        if t.is_("if"):
            return self.if_stmt()
        if t.is_("while"):
            return self.while_stmt()
        if t.is_("assert"):
            self.advance()
            cond = A.ELIDED if self.accept("...") else self.expr()
            self.expect(";")
            return A.Assert(cond, t.loc)
        if t.is_("assume"):
            self.advance()
            cond = self.expr()
            self.expect(";")
            return A.Assume(cond, t.loc)
        if t.is_("return"):
            self.advance()
            values = () if self.at(";") else self.expr_list()
            self.expect(";")
            return A.Return(values, t.loc)
        if t.is_("break"):
            self.advance()
            self.expect(";")
            return A.Break(t.loc)
        if t.is_("modify"):
            self.advance()
            frame = A.ELIDED if self.accept("...") else self.expr_list()
            if self.at("{"):
                return A.Modify(frame, self.block(), t.loc)
            self.expect(";")
            return A.Modify(frame, None, t.loc)
        if t.is_("label"):
            self.advance()
            name = self.ident().text
            self.expect(":")
            return A.Labeled(name, self.stmt(), t.loc)
        return self.simple_stmt()

    def simple_stmt(self) -> A.Stmt:
        start = self.tok.loc
        lhs = self.expr_list()
        if self.accept(":="):
            s = self.assign_rest(lhs, start)
        elif self.accept(":|"):
            assume = bool(self.accept("assume"))
            s = A.AssignSuchThat(lhs, self.expr(), assume, start)
        else:
            if len(lhs) != 1 or not isinstance(lhs[0], A.Apply):
                self.fail("expected ':=', ':|', or a call statement")
            s = A.Call((), lhs[0].callee, lhs[0].args, start)
        self.expect(";")
        return s

    def assign_rest(self, lhs: tuple, start) -> A.Stmt:
        if self.at("new"):
            nt = self.advance()
            cls = self.type_ref()
            args: tuple = ()
            if self.accept("("):
                args = () if self.at(")") else self.expr_list()
                self.expect(")")
            if len(lhs) != 1:
                raise ParseError("`new` assigns exactly one target", nt.loc)
            return A.New(lhs[0], cls, args, start)
        return A.Assign(lhs, self.expr_list(), start)

    def var_decl(self) -> A.VarDecl:
        start = self.tok.loc
        ghost = bool(self.accept("ghost"))
        self.expect("var")
        names, types, locs = [], [], []
        while True:
            t = self.ident()
            names.append(t.text)
            locs.append(t.loc)
            types.append(self.type_ref() if self.accept(":") else None)
            if not self.accept(","):
                break
        lhs = tuple(A.Name(n, loc) for n, loc in zip(names, locs))
        init = None
        if self.accept(":="):
            init = self.assign_rest(lhs, start)
        elif self.accept(":|"):
            assume = bool(self.accept("assume"))
            init = A.AssignSuchThat(lhs, self.expr(), assume, start)
        self.expect(";")
        return A.VarDecl(tuple(names), tuple(types), ghost, init, start)

    def guard(self):
        if self.accept("*"):
            return A.STAR
        if self.accept("..."):
            return A.ELIDED
        return self.expr()

    def if_stmt(self) -> A.If:
        start = self.expect("if").loc
        guard = self.guard()
        then = self.block()
        else_ = None
        if self.accept("else"):
            if self.at("if"):
                inner = self.if_stmt()
                else_ = A.Block((inner,), inner.loc)
            else:
                else_ = self.block()
        return A.If(guard, then, else_, start)

    def while_stmt(self) -> A.While:
        start = self.expect("while").loc
        guard = self.guard()
        invs = []
        decreases: tuple = ()
        while True:
            if self.accept("invariant"):
                invs.append(self.expr())
            elif self.accept("decreases"):
                decreases = self.expr_list()
            else:
                break
        body = self.block()
        return A.While(guard, tuple(invs), body, decreases, start)

    # ------------------------------------------------------------ expressions

    def expr_list(self) -> tuple:
        out = [self.expr()]
        while self.accept(","):
            out.append(self.expr())
        return tuple(out)

    def expr(self) -> A.Expr:
        left = self.or_expr()
        if self.at("==>"):
            t = self.advance()
            return A.Binary("==>", left, self.expr(), t.loc)
        return left

    def or_expr(self) -> A.Expr:
        left = self.and_expr()
        while self.at("||"):
            t = self.advance()
            left = A.Binary("||", left, self.and_expr(), t.loc)
        return left

    def and_expr(self) -> A.Expr:
        left = self.comparison()
        while self.at("&&"):
            t = self.advance()
            left = A.Binary("&&", left, self.comparison(), t.loc)
        return left

    def comparison(self) -> A.Expr:
        first = self.additive()
        ops, operands = [], [first]
        start = self.tok.loc
        while self.tok.kind in (SYM, KW) and self.tok.text in COMPARISONS:
            ops.append(self.advance().text)
            operands.append(self.additive())
        if not ops:
            return first
        if len(ops) == 1:
            return A.Binary(ops[0], operands[0], operands[1], start)
        opset = set(ops)
        if not (opset <= ASCENDING or opset <= DESCENDING):
            raise ParseError(f"cannot chain comparison operators {' '.join(ops)}", start)
        return A.Chain(tuple(ops), tuple(operands), start)

    def additive(self) -> A.Expr:
        left = self.multiplicative()
        while self.at("+") or self.at("-"):
            t = self.advance()
            left = A.Binary(t.text, left, self.multiplicative(), t.loc)
        return left

    def multiplicative(self) -> A.Expr:
        left = self.unary()
        while self.at("*") or self.at("/") or self.at("%"):
            t = self.advance()
            left = A.Binary(t.text, left, self.unary(), t.loc)
        return left

    def unary(self) -> A.Expr:
        if self.at("!") or self.at("-"):
            t = self.advance()
            return A.Unary(t.text, self.unary(), t.loc)
        return self.postfix()

    def postfix(self) -> A.Expr:
        e = self.primary()
        while True:
            if self.at("."):
                t = self.advance()
                e = A.Field(e, self.ident().text, t.loc)
            elif self.at("(") and isinstance(e, (A.Name, A.Field)):
                t = self.advance()
                args = () if self.at(")") else self.expr_list()
                self.expect(")")
                e = A.Apply(e, args, e.loc)
            elif self.at("["):
                t = self.advance()
                idx = self.expr()
                self.expect("]")
                e = A.Index(e, idx, t.loc)
            else:
                return e

    def primary(self) -> A.Expr:
        t = self.tok
        if t.kind == INT:
            self.advance()
            return A.IntLit(int(t.text), t.loc)
        if t.kind == IDENT:
            self.advance()
            return A.Name(t.text, t.loc)
        if t.is_("true") or t.is_("false"):
            self.advance()
            return A.BoolLit(t.text == "true", t.loc)
        if t.is_("null"):
            self.advance()
            return A.NullLit(t.loc)
        if t.is_("this"):
            self.advance()
            return A.This(t.loc)
        if t.is_("old") or t.is_("fresh"):
            self.advance()
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return (A.Old if t.text == "old" else A.Fresh)(e, t.loc)
        if t.is_("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.is_("{"):
            self.advance()
            elems = () if self.at("}") else self.expr_list()
            self.expect("}")
            return A.SetDisplay(elems, t.loc)
        if t.is_("["):
            self.advance()
            elems = () if self.at("]") else self.expr_list()
            self.expect("]")
            return A.SeqDisplay(elems, t.loc)
        if t.is_("|"):
            self.advance()
            e = self.expr()
            self.expect("|")
            return A.Length(e, t.loc)
        if t.is_("if"):
            self.advance()
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return A.Ite(c, a, b, t.loc)
        if t.is_("match"):
            return self.match_expr()
        self.fail("expected an expression")

    def match_expr(self) -> A.Match:
        start = self.expect("match").loc
        scrutinee = self.expr()
        cases = []
        while self.at("case"):
            ct = self.advance()
            ctor = self.ident().text
            vars_ = []
            if self.accept("("):
                if not self.at(")"):
                    vars_.append(self.ident().text)
                    while self.accept(","):
                        vars_.append(self.ident().text)
                self.expect(")")
            self.expect("=>")
            cases.append(A.Case(ctor, tuple(vars_), self.expr(), ct.loc))
        if not cases:
            self.fail("expected 'case'")
        return A.Match(scrutinee, tuple(cases), start)


def parse_program(tokens: list, filename: str = "<input>") -> A.SourceProgram:
    return Parser(tokens, filename).program()


def parse_text(text: str, filename: str = "<input>") -> A.SourceProgram:
    return parse_program(tokenize(text, filename), filename)


def parse_files(paths) -> A.SourceProgram:
    """Concatenate the modules of several `.rfn` files into one program."""
    mods = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            text = fh.read()
        mods.extend(parse_text(text, str(p)).modules)
    return A.SourceProgram(tuple(mods))


def parse_expr(text: str) -> A.Expr:
    p = Parser(tokenize(text))
    e = p.expr()
    if p.tok.kind != EOF:
        p.fail("unexpected trailing input")
    return e

"""Lexer and recursive-descent parser for MiniC and MiniTag."""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class FrontendError(Exception):
    """Lexical, syntax, dialect or type error; carries all diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


KEYWORDS = {
    "struct", "union", "enum", "impl", "int", "void", "if", "else", "while",
    "switch", "case", "default", "match", "let", "ref", "return", "print",
    "abort", "new", "null", "extern",
}
MINITAG_ONLY = {"enum", "impl", "match", "let", "ref"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|=>|::|==|!=|<=|>=|&&|\|\||\+=|-=|\*=|[{}()\[\];,.:=<>+\-*/%!&|_])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str  # int, ident, kw, op, eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise FrontendError([Diagnostic(line, pos - line_start + 1,
                                            f"unexpected character {source[pos]!r}")])
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            if text == "_":
                tokens.append(Token("op", text, line, col))
            else:
                tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        elif kind in ("int", "op"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]


class Parser:
    def __init__(self, source: str, dialect: str = A.MINIC):
        self.toks = tokenize(source)
        self.i = 0
        self.dialect = dialect
        self.type_names = self._prescan_type_names()

    # -- token helpers --

    def _prescan_type_names(self) -> set[str]:
        names = set()
        for a, b in zip(self.toks, self.toks[1:]):
            if a.kind == "kw" and a.text in ("struct", "union", "enum") and b.kind == "ident":
                names.add(b.text)
        return names

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise FrontendError([Diagnostic(tok.line, tok.col, msg)])

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t.text

    def minitag(self, what: str):
        if self.dialect != A.MINITAG:
            self.error(f"dialect violation: {what} is not allowed in MiniC")

    # -- types --

    def starts_type(self) -> bool:
        t = self.tok
        if t.kind == "kw" and t.text in ("int", "void", "struct", "union"):
            return True
        if t.kind == "ident" and t.text in self.type_names:
            nxt = self.peek()
            return nxt.kind == "ident" or (nxt.kind == "op" and nxt.text == "*" and self._ptr_decl_follows())
        return False

    def _ptr_decl_follows(self) -> bool:
        k = 1
        while self.peek(k).kind == "op" and self.peek(k).text == "*":
            k += 1
        return self.peek(k).kind == "ident" and self.peek(k + 1).text in ("=", ";", ",", ")")

    def parse_type(self) -> A.Type:
        t = self.tok
        if self.accept("int"):
            ty: A.Type = A.INT
        elif self.accept("void"):
            ty = A.VOID
        elif self.accept("struct") or self.accept("union"):
            ty = A.NamedType(self.ident())
        elif t.kind == "ident":
            self.i += 1
            ty = A.NamedType(t.text)
        else:
            self.error(f"expected type, found {t.text!r}")
        while self.accept("*"):
            ty = A.PtrType(ty)
        return ty

    # -- top level --

    def parse_program(self) -> A.Program:
        prog = A.Program()
        while self.tok.kind != "eof":
            t = self.tok
            if t.text == "struct" and self.peek().kind == "ident" and self.peek(2).text == "{":
                prog.types.extend(self.parse_struct())
            elif t.text == "union" and self.peek().kind == "ident" and self.peek(2).text == "{":
                prog.types.append(self.parse_union())
            elif t.text == "enum":
                self.minitag("enum")
                prog.types.append(self.parse_enum())
            elif t.text == "impl":
                self.minitag("impl")
                prog.funcs.extend(self.parse_impl())
            elif t.text == "extern":
                self.i += 1
                prog.funcs.append(self.parse_func(extern=True))
            else:
                prog.funcs.append(self.parse_func())
        return prog

    def parse_struct(self) -> list[A.TypeDef]:
        line = self.expect("struct").line
        name = self.ident()
        self.expect("{")
        fields: list[A.Field] = []
        extra: list[A.TypeDef] = []
        while not self.accept("}"):
            if self.at("union") and self.peek().text == "{":
                uline = self.tok.line
                self.i += 1
                ufields = self.parse_field_list()
                fname = self.ident()
                self.expect(";")
                uname = f"{name}_{fname}"
                extra.append(A.TypeDef(uname, "union", ufields, anonymous=True, line=uline))
                self.type_names.add(uname)
                fields.append(A.Field(fname, A.NamedType(uname)))
            else:
                ty = self.parse_type()
                fields.append(A.Field(self.ident(), ty))
                self.expect(";")
        self.accept(";")
        return [A.TypeDef(name, "struct", fields, line=line)] + extra

    def parse_field_list(self) -> list[A.Field]:
        self.expect("{")
        fields = []
        while not self.accept("}"):
            ty = self.parse_type()
            fields.append(A.Field(self.ident(), ty))
            self.expect(";")
        return fields

    def parse_union(self) -> A.TypeDef:
        line = self.expect("union").line
        name = self.ident()
        fields = self.parse_field_list()
        self.accept(";")
        return A.TypeDef(name, "union", fields, line=line)

    def parse_enum(self) -> A.TypeDef:
        line = self.expect("enum").line
        name = self.ident()
        self.expect("{")
        variants = []
        while not self.accept("}"):
            vname = self.ident()
            payload = None
            if self.accept("("):
                payload = self.parse_type()
                self.expect(")")
            variants.append(A.Variant(vname, payload))
            if not self.accept(","):
                self.expect("}")
                break
        self.accept(";")
        return A.TypeDef(name, "enum", [], variants=variants, line=line)

    def parse_impl(self) -> list[A.FuncDef]:
        self.expect("impl")
        owner = self.ident()
        self.expect("{")
        funcs = []
        while not self.accept("}"):
            f = self.parse_func()
            f.owner = owner
            funcs.append(f)
        return funcs

    def parse_func(self, extern: bool = False) -> A.FuncDef:
        line = self.tok.line
        ret = self.parse_type()
        name = self.ident()
        self.expect("(")
        params = []
        if not self.accept(")"):
            while True:
                ty = self.parse_type()
                params.append(A.Param(self.ident(), ty))
                if self.accept(")"):
                    break
                self.expect(",")
        if extern:
            self.expect(";")
            return A.FuncDef(name, ret, params, None, line=line)
        return A.FuncDef(name, ret, params, self.parse_block(), line=line)

    # -- statements --

    def parse_block(self) -> A.Block:
        line = self.expect("{").line
        stmts = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            stmts.append(self.parse_stmt())
        return A.Block(stmts, line=line)

    def parse_stmt(self) -> A.Stmt:
        t = self.tok
        line = t.line
        if self.at("{"):
            return self.parse_block()
        if self.at("if"):
            return self.parse_if()
        if self.accept("while"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            return A.While(cond, self.parse_block(), line=line)
        if self.at("switch"):
            return self.parse_switch()
        if self.at("match"):
            self.minitag("match")
            return self.parse_match()
        if self.accept("return"):
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return A.Return(value, line=line)
        if self.accept("print"):
            self.expect("(")
            value = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return A.Print(value, line=line)
        if self.accept("abort"):
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return A.Abort(line=line)
        if self.starts_type():
            ty = self.parse_type()
            name = self.ident()
            init = self.parse_expr() if self.accept("=") else None
            self.expect(";")
            return A.VarDecl(name, ty, init, line=line)
        target = self.parse_expr()
        for op in ("=", "+=", "-=", "*="):
            if self.accept(op):
                value = self.parse_expr()
                self.expect(";")
                return A.Assign(target, op, value, line=line)
        self.expect(";")
        if not isinstance(target, (A.Call, A.MethodCall)):
            self.error("expression statement must be a call", t)
        return A.ExprStmt(target, line=line)

    def parse_if(self) -> A.Stmt:
        line = self.expect("if").line
        if self.accept("let"):
            self.minitag("if let")
            patterns = self.parse_patterns()
            self.expect("=")
            self.expect("(")
            subject = self.parse_expr()
            self.expect(")")
            then = self.parse_block()
            return A.IfLet(patterns, subject, then, self.parse_else(), line=line)
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_block()
        return A.If(cond, then, self.parse_else(), line=line)

    def parse_else(self) -> A.Block | None:
        if not self.accept("else"):
            return None
        if self.at("if"):
            line = self.tok.line
            return A.Block([self.parse_if()], line=line)
        return self.parse_block()

    def parse_case_body(self) -> A.Block:
        line = self.tok.line
        stmts = []
        while not (self.at("case") or self.at("default") or self.at("}")):
            stmts.append(self.parse_stmt())
        return A.Block(stmts, line=line)

    def parse_switch(self) -> A.Switch:
        line = self.expect("switch").line
        self.expect("(")
        subject = self.parse_expr()
        self.expect(")")
        self.expect("{")
        cases, default = [], None
        seen: set[int] = set()
        while not self.accept("}"):
            if self.accept("default"):
                self.expect(":")
                if default is not None:
                    self.error("duplicate default")
                default = self.parse_case_body()
                continue
            ctok = self.expect("case")
            neg = self.accept("-")
            if self.tok.kind != "int":
                self.error("case label must be an integer constant")
            value = int(self.tok.text) * (-1 if neg else 1)
            self.i += 1
            self.expect(":")
            if value in seen:
                self.error(f"duplicate case {value}", ctok)
            seen.add(value)
            cases.append(A.Case(value, self.parse_case_body()))
        return A.Switch(subject, cases, default, line=line)

    def parse_pattern(self) -> A.Pattern:
        enum = self.ident()
        self.expect("::")
        variant = self.ident()
        if not self.accept("("):
            return A.Pattern(enum, variant)
        binding = None
        if self.accept("ref"):
            binding = self.ident()
        else:
            self.expect("_")
        self.expect(")")
        return A.Pattern(enum, variant, True, binding)

    def parse_patterns(self) -> list[A.Pattern]:
        pats = [self.parse_pattern()]
        while self.accept("|"):
            pats.append(self.parse_pattern())
        return pats

    def parse_match(self) -> A.Match:
        line = self.expect("match").line
        self.expect("(")
        subject = self.parse_expr()
        self.expect(")")
        self.expect("{")
        arms, default = [], None
        while not self.accept("}"):
            if self.accept("_"):
                self.expect("=>")
                default = self.parse_block()
                continue
            pats = self.parse_patterns()
            self.expect("=>")
            arms.append(A.Arm(pats, self.parse_block()))
        return A.Match(subject, arms, default, line=line)

    # -- expressions --

    def parse_expr(self, level: int = 0) -> A.Expr:
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _BINARY_LEVELS[level]:
            op = self.tok.text
            line = self.tok.line
            self.i += 1
            right = self.parse_expr(level + 1)
            left = A.Binary(op, left, right, line=line)
        return left

    def parse_unary(self) -> A.Expr:
        line = self.tok.line
        if self.accept("-"):
            return A.Unary("-", self.parse_unary(), line=line)
        if self.accept("!"):
            return A.Unary("!", self.parse_unary(), line=line)
        if self.accept("*"):
            return A.Deref(self.parse_unary(), line=line)
        if self.accept("&"):
            return A.AddrOf(self.parse_unary(), line=line)
        return self.parse_postfix()

    def parse_postfix(self) -> A.Expr:
        e = self.parse_primary()
        while True:
            line = self.tok.line
            if self.accept("."):
                base = e
            elif self.accept("->"):
                base = A.Deref(e, line=line)
            else:
                return e
            name = self.ident()
            if self.at("("):
                self.minitag("method call")
                e = A.MethodCall(base, name, self.parse_args(), line=line)
            else:
                e = A.FieldAccess(base, name, line=line)

    def parse_args(self) -> list[A.Expr]:
        self.expect("(")
        args = []
        if self.accept(")"):
            return args
        while True:
            args.append(self.parse_expr())
            if self.accept(")"):
                return args
            self.expect(",")

    def parse_primary(self) -> A.Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return A.IntLit(int(t.text), line=t.line)
        if self.accept("null"):
            return A.Null(line=t.line)
        if self.accept("new"):
            return A.New(self.parse_type(), line=t.line)
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.i += 1
            if self.accept("::"):
                self.minitag("variant construction")
                variant = self.ident()
                payload = None
                if self.accept("("):
                    payload = self.parse_expr()
                    self.expect(")")
                return A.Construct(t.text, variant, payload, line=t.line)
            if self.at("("):
                return A.Call(t.text, self.parse_args(), line=t.line)
            return A.Var(t.text, line=t.line)
        self.error(f"unexpected token {t.text or 'end of input'!r}")


def parse_syntax(source: str, dialect: str = A.MINIC) -> A.Program:
    """Parse without type checking."""
    return Parser(source, dialect).parse_program()


def parse(source: str, dialect: str = A.MINIC) -> A.Program:
    """Parse and type-check ``source``; raises :class:`FrontendError`."""
    from .typecheck import check

    prog = parse_syntax(source, dialect)
    check(prog, dialect)
    return prog

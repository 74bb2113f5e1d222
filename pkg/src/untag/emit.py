"""Pretty printer for MiniC and MiniTag programs."""

from __future__ import annotations

from . import ast as A

MINITAG_HEADER = "// minitag\n"


class DialectError(ValueError):
    pass


_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
_UNARY = 7
_POSTFIX = 8


def type_str(t: A.Type) -> str:
    return str(t)


class Emitter:
    def __init__(self, program: A.Program, dialect: str):
        self.prog = program
        self.dialect = dialect
        self.lines: list[str] = []

    def tag_only(self, what: str):
        if self.dialect != A.MINITAG:
            raise DialectError(f"{what} cannot be emitted as MiniC")

    def out(self, depth: int, text: str):
        self.lines.append("  " * depth + text)

    def run(self) -> str:
        anon = {t.name: t for t in self.prog.types if t.anonymous}
        for td in self.prog.types:
            if td.anonymous:
                continue
            self.typedef(td, anon)
        i = 0
        funcs = self.prog.funcs
        while i < len(funcs):
            fn = funcs[i]
            if fn.owner is None:
                self.func(fn, 0)
                i += 1
                continue
            self.tag_only("impl block")
            self.out(0, f"impl {fn.owner} {{")
            while i < len(funcs) and funcs[i].owner == fn.owner:
                self.func(funcs[i], 1)
                i += 1
            if self.lines and self.lines[-1] == "":
                self.lines.pop()
            self.out(0, "}")
            self.lines.append("")
        text = "\n".join(self.lines).rstrip("\n") + "\n"
        if self.dialect == A.MINITAG:
            text = MINITAG_HEADER + text
        return text

    def typedef(self, td: A.TypeDef, anon: dict[str, A.TypeDef]):
        if td.kind == "enum":
            self.tag_only("enum")
            parts = [v.name if v.payload is None else f"{v.name}({type_str(v.payload)})"
                     for v in td.variants]
            self.out(0, f"enum {td.name} {{ {', '.join(parts)} }}")
            self.lines.append("")
            return
        self.out(0, f"{td.kind} {td.name} {{")
        for f in td.fields:
            inner = anon.get(f.type.name) if isinstance(f.type, A.NamedType) else None
            if inner is not None and td.kind == "struct":
                members = " ".join(f"{type_str(g.type)} {g.name};" for g in inner.fields)
                self.out(1, f"union {{ {members} }} {f.name};")
            else:
                self.out(1, f"{type_str(f.type)} {f.name};")
        self.out(0, "};")
        self.lines.append("")

    def func(self, fn: A.FuncDef, depth: int):
        params = ", ".join(f"{type_str(p.type)} {p.name}" for p in fn.params)
        head = f"{type_str(fn.ret)} {fn.name}({params})"
        if fn.body is None:
            self.out(depth, f"extern {head};")
            self.lines.append("")
            return
        self.out(depth, head + " {")
        self.stmts(fn.body.stmts, depth + 1)
        self.out(depth, "}")
        self.lines.append("")

    def stmts(self, stmts, depth):
        for s in stmts:
            self.stmt(s, depth)

    def else_part(self, els: A.Block | None, depth: int):
        if els is None:
            self.out(depth, "}")
            return
        if len(els.stmts) == 1 and isinstance(els.stmts[0], (A.If, A.IfLet)):
            self.out(depth, "} else " + self.if_head(els.stmts[0]) + " {")
            inner = els.stmts[0]
            self.stmts(inner.then.stmts, depth + 1)
            self.else_part(inner.els, depth)
            return
        self.out(depth, "} else {")
        self.stmts(els.stmts, depth + 1)
        self.out(depth, "}")

    def if_head(self, s) -> str:
        if isinstance(s, A.If):
            return f"if ({self.expr(s.cond)})"
        self.tag_only("if let")
        return f"if let {self.patterns(s.patterns)} = ({self.expr(s.subject)})"

    def patterns(self, pats: list[A.Pattern]) -> str:
        out = []
        for p in pats:
            text = f"{p.enum}::{p.variant}"
            if p.has_payload:
                text += f"(ref {p.binding})" if p.binding else "(_)"
            out.append(text)
        return " | ".join(out)

    def stmt(self, s: A.Stmt, depth: int):
        if isinstance(s, A.Block):
            self.out(depth, "{")
            self.stmts(s.stmts, depth + 1)
            self.out(depth, "}")
        elif isinstance(s, A.VarDecl):
            init = f" = {self.expr(s.init)}" if s.init is not None else ""
            self.out(depth, f"{type_str(s.type)} {s.name}{init};")
        elif isinstance(s, A.Assign):
            self.out(depth, f"{self.expr(s.target)} {s.op} {self.expr(s.value)};")
        elif isinstance(s, A.ExprStmt):
            self.out(depth, f"{self.expr(s.expr)};")
        elif isinstance(s, (A.If, A.IfLet)):
            self.out(depth, self.if_head(s) + " {")
            self.stmts(s.then.stmts, depth + 1)
            self.else_part(s.els, depth)
        elif isinstance(s, A.While):
            self.out(depth, f"while ({self.expr(s.cond)}) {{")
            self.stmts(s.body.stmts, depth + 1)
            self.out(depth, "}")
        elif isinstance(s, A.Switch):
            self.out(depth, f"switch ({self.expr(s.subject)}) {{")
            for c in s.cases:
                self.out(depth + 1, f"case {c.value}:")
                self.stmts(c.body.stmts, depth + 2)
            if s.default is not None:
                self.out(depth + 1, "default:")
                self.stmts(s.default.stmts, depth + 2)
            self.out(depth, "}")
        elif isinstance(s, A.Match):
            self.tag_only("match")
            self.out(depth, f"match ({self.expr(s.subject)}) {{")
            for arm in s.arms:
                self.out(depth + 1, f"{self.patterns(arm.patterns)} => {{")
                self.stmts(arm.body.stmts, depth + 2)
                self.out(depth + 1, "}")
            if s.default is not None:
                self.out(depth + 1, "_ => {")
                self.stmts(s.default.stmts, depth + 2)
                self.out(depth + 1, "}")
            self.out(depth, "}")
        elif isinstance(s, A.Return):
            self.out(depth, "return;" if s.value is None else f"return {self.expr(s.value)};")
        elif isinstance(s, A.Print):
            self.out(depth, f"print({self.expr(s.value)});")
        elif isinstance(s, A.Abort):
            self.out(depth, "abort();")
        else:
            raise TypeError(f"unknown statement {s!r}")

    # -- expressions --

    def expr(self, e: A.Expr, ctx: int = 0) -> str:
        text, prec = self._expr(e)
        return f"({text})" if prec < ctx else text

    def _expr(self, e: A.Expr) -> tuple[str, int]:
        if isinstance(e, A.IntLit):
            if e.value < 0:
                return f"-{-e.value}", _UNARY
            return str(e.value), _POSTFIX + 1
        if isinstance(e, A.Null):
            return "null", _POSTFIX + 1
        if isinstance(e, A.Var):
            return e.name, _POSTFIX + 1
        if isinstance(e, A.FieldAccess):
            if isinstance(e.base, A.Deref):
                return f"{self.expr(e.base.operand, _POSTFIX)}->{e.name}", _POSTFIX
            return f"{self.expr(e.base, _POSTFIX)}.{e.name}", _POSTFIX
        if isinstance(e, A.MethodCall):
            self.tag_only("method call")
            args = ", ".join(self.expr(a) for a in e.args)
            if isinstance(e.receiver, A.Deref):
                return f"{self.expr(e.receiver.operand, _POSTFIX)}->{e.method}({args})", _POSTFIX
            return f"{self.expr(e.receiver, _POSTFIX)}.{e.method}({args})", _POSTFIX
        if isinstance(e, A.Call):
            return f"{e.func}({', '.join(self.expr(a) for a in e.args)})", _POSTFIX
        if isinstance(e, A.Construct):
            self.tag_only("variant construction")
            text = f"{e.enum}::{e.variant}"
            if e.payload is not None:
                text += f"({self.expr(e.payload)})"
            return text, _POSTFIX
        if isinstance(e, A.New):
            return f"new {type_str(e.type)}", _UNARY
        if isinstance(e, A.Deref):
            return f"*{self.expr(e.operand, _UNARY)}", _UNARY
        if isinstance(e, A.AddrOf):
            return f"&{self.expr(e.operand, _UNARY)}", _UNARY
        if isinstance(e, A.Unary):
            inner = self.expr(e.operand, _UNARY)
            if e.op == "-" and inner.startswith("-"):
                inner = f"({inner})"
            return f"{e.op}{inner}", _UNARY
        if isinstance(e, A.Binary):
            p = _PREC[e.op]
            return f"{self.expr(e.left, p)} {e.op} {self.expr(e.right, p + 1)}", p
        raise TypeError(f"unknown expression {e!r}")


def emit(program: A.Program, dialect: str = A.MINIC) -> str:
    """Render ``program`` as source text in ``dialect``."""
    return Emitter(program, dialect).run()

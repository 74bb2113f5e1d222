"""Type checking for MiniC and MiniTag programs."""

from __future__ import annotations

from typing import Optional

from . import ast as A
from .parser import Diagnostic, FrontendError


def is_scalar(t: A.Type) -> bool:
    return isinstance(t, (A.IntType, A.PtrType, A.NullType))


def compatible(dst: A.Type, src: A.Type) -> bool:
    if dst == src:
        return True
    return isinstance(dst, A.PtrType) and isinstance(src, A.NullType)


class TypeContext:
    """Type lookups over a program's definitions."""

    def __init__(self, program: A.Program):
        self.program = program
        self.defs = {t.name: t for t in program.types}
        self.funcs = {f.qualname: f for f in program.funcs}

    def typedef(self, t: A.Type) -> Optional[A.TypeDef]:
        if isinstance(t, A.NamedType):
            return self.defs.get(t.name)
        return None

    def kind_of(self, t: A.Type) -> Optional[str]:
        td = self.typedef(t)
        return td.kind if td else None

    def field_type(self, t: A.Type, name: str) -> Optional[A.Type]:
        td = self.typedef(t)
        if td is None or td.kind == "enum":
            return None
        return td.field_type(name)

    def env(self, fn: A.FuncDef) -> dict[str, A.Type]:
        """Function-level variable environment (params, locals, bindings)."""
        env: dict[str, A.Type] = {}
        if fn.owner:
            env["self"] = A.PtrType(A.NamedType(fn.owner))
        for p in fn.params:
            env[p.name] = p.type
        if fn.body is not None:
            for s in A.walk_stmts(fn.body):
                if isinstance(s, A.VarDecl):
                    env.setdefault(s.name, s.type)
        return env

    def type_of(self, e: A.Expr, env: dict[str, A.Type]) -> A.Type:
        """Type of a well-typed expression (no diagnostics)."""
        if isinstance(e, A.IntLit):
            return A.INT
        if isinstance(e, A.Null):
            return A.NULL
        if isinstance(e, A.Var):
            return env[e.name]
        if isinstance(e, A.FieldAccess):
            return self.field_type(self.type_of(e.base, env), e.name)
        if isinstance(e, A.Deref):
            return self.type_of(e.operand, env).target
        if isinstance(e, A.AddrOf):
            return A.PtrType(self.type_of(e.operand, env))
        if isinstance(e, A.New):
            return A.PtrType(e.type)
        if isinstance(e, A.Call):
            return self.funcs[e.func].ret
        if isinstance(e, A.MethodCall):
            owner = self.type_of(e.receiver, env)
            return self.funcs[f"{owner.name}.{e.method}"].ret
        if isinstance(e, (A.Unary, A.Binary)):
            return A.INT
        if isinstance(e, A.Construct):
            return A.NamedType(e.enum)
        raise TypeError(f"unknown expression {e!r}")


def is_lvalue(e: A.Expr) -> bool:
    if isinstance(e, A.Var):
        return True
    if isinstance(e, A.Deref):
        return True
    if isinstance(e, A.FieldAccess):
        return is_lvalue(e.base)
    return False


class Checker:
    def __init__(self, program: A.Program, dialect: str):
        self.prog = program
        self.dialect = dialect
        self.ctx = TypeContext(program)
        self.diags: list[Diagnostic] = []

    def err(self, line: int, msg: str):
        self.diags.append(Diagnostic(line, 0, msg))

    # -- definitions --

    def check_type_exists(self, t: A.Type, line: int):
        while isinstance(t, A.PtrType):
            t = t.target
        if isinstance(t, A.NamedType) and t.name not in self.ctx.defs:
            self.err(line, f"unknown type {t.name}")

    def check(self):
        seen: set[str] = set()
        for td in self.prog.types:
            if td.name in seen:
                self.err(td.line, f"duplicate definition {td.name}")
            seen.add(td.name)
            if td.kind == "enum" and self.dialect != A.MINITAG:
                self.err(td.line, "dialect violation: enum is not allowed in MiniC")
            names = [f.name for f in td.fields] + [v.name for v in td.variants]
            for n in names:
                if names.count(n) > 1:
                    self.err(td.line, f"duplicate field {n} in {td.name}")
                    break
            for f in td.fields:
                self.check_type_exists(f.type, td.line)
                if isinstance(f.type, A.VoidType):
                    self.err(td.line, f"field {f.name} has void type")
            for v in td.variants:
                if v.payload is not None:
                    self.check_type_exists(v.payload, td.line)
        for td in self.prog.types:
            if td.anonymous:
                users = [(s.name, f.name) for s in self.prog.types if s.kind == "struct"
                         for f in s.fields if f.type == A.NamedType(td.name)]
                if len(users) != 1:
                    self.err(td.line, f"anonymous union {td.name} must be used by exactly one field")
        fseen: set[str] = set()
        for fn in self.prog.funcs:
            if fn.qualname in fseen:
                self.err(fn.line, f"duplicate definition {fn.qualname}")
            fseen.add(fn.qualname)
            if fn.owner is not None:
                if self.dialect != A.MINITAG:
                    self.err(fn.line, "dialect violation: methods are not allowed in MiniC")
                if fn.owner not in self.ctx.defs:
                    self.err(fn.line, f"unknown type {fn.owner}")
            self.check_type_exists(fn.ret, fn.line)
            for p in fn.params:
                self.check_type_exists(p.type, fn.line)
        for fn in self.prog.funcs:
            if fn.body is not None:
                self.check_func(fn)
        if self.diags:
            raise FrontendError(self.diags)

    # -- bodies --

    def check_func(self, fn: A.FuncDef):
        self.fn = fn
        env: dict[str, A.Type] = {}
        if fn.owner:
            env["self"] = A.PtrType(A.NamedType(fn.owner))
        for p in fn.params:
            if p.name in env:
                self.err(fn.line, f"duplicate definition {p.name}")
            env[p.name] = p.type
        self.bindings: dict[str, A.Type] = {}
        for s in A.walk_stmts(fn.body):
            if isinstance(s, A.VarDecl):
                if s.name in env:
                    self.err(s.line, f"duplicate definition {s.name}")
                self.check_type_exists(s.type, s.line)
                if isinstance(s.type, A.VoidType):
                    self.err(s.line, f"variable {s.name} has void type")
                env[s.name] = s.type
        self.env = env
        self.check_block(fn.body)

    def check_block(self, b: A.Block):
        for s in b.stmts:
            self.check_stmt(s)

    def cond(self, e: A.Expr, line: int):
        t = self.expr(e)
        if t is not None and not is_scalar(t):
            self.err(line, f"condition has non-scalar type {t}")

    def check_stmt(self, s: A.Stmt):
        if isinstance(s, A.Block):
            self.check_block(s)
        elif isinstance(s, A.VarDecl):
            if s.init is not None:
                t = self.expr(s.init)
                if t is not None and not compatible(s.type, t):
                    self.err(s.line, f"cannot initialize {s.name}: {s.type} from {t}")
        elif isinstance(s, A.Assign):
            if not is_lvalue(s.target):
                self.err(s.line, "assignment target is not an lvalue")
            lt = self.expr(s.target)
            rt = self.expr(s.value)
            if lt is None or rt is None:
                return
            if s.op == "=":
                if not compatible(lt, rt):
                    self.err(s.line, f"cannot assign {rt} to {lt}")
            elif lt != A.INT or rt != A.INT:
                self.err(s.line, f"operator {s.op} requires integers")
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr)
        elif isinstance(s, A.If):
            self.cond(s.cond, s.line)
            self.check_block(s.then)
            if s.els:
                self.check_block(s.els)
        elif isinstance(s, A.While):
            self.cond(s.cond, s.line)
            self.check_block(s.body)
        elif isinstance(s, A.Switch):
            if self.expr(s.subject) not in (A.INT, None):
                self.err(s.line, "switch subject must be an integer")
            for c in s.cases:
                self.check_block(c.body)
            if s.default:
                self.check_block(s.default)
        elif isinstance(s, (A.Match, A.IfLet)):
            self.check_pattern_stmt(s)
        elif isinstance(s, A.Return):
            ret = self.fn.ret
            if s.value is None:
                if ret != A.VOID:
                    self.err(s.line, "missing return value")
            else:
                t = self.expr(s.value)
                if t is not None and not compatible(ret, t):
                    self.err(s.line, f"cannot return {t} from function returning {ret}")
        elif isinstance(s, A.Print):
            if self.expr(s.value) not in (A.INT, None):
                self.err(s.line, "print expects an integer")
        elif isinstance(s, A.Abort):
            pass
        else:
            self.err(0, f"unknown statement {type(s).__name__}")

    def check_pattern_stmt(self, s):
        if self.dialect != A.MINITAG:
            self.err(s.line, "dialect violation: pattern matching is not allowed in MiniC")
            return
        if not is_lvalue(s.subject):
            self.err(s.line, "match subject must be an lvalue")
        t = self.expr(s.subject)
        td = self.ctx.typedef(t) if t is not None else None
        if td is None or td.kind != "enum":
            self.err(s.line, "match subject must have an enum type")
            return
        groups = [s.patterns] if isinstance(s, A.IfLet) else [a.patterns for a in s.arms]
        bodies = [s.then] if isinstance(s, A.IfLet) else [a.body for a in s.arms]
        for pats, body in zip(groups, bodies):
            binding_types = set()
            names = set()
            for p in pats:
                if p.enum != td.name:
                    self.err(s.line, f"pattern enum {p.enum} does not match {td.name}")
                    continue
                v = td.variant(p.variant)
                if v is None:
                    self.err(s.line, f"unknown variant {p.variant} of {td.name}")
                    continue
                if p.has_payload != (v.payload is not None):
                    self.err(s.line, f"variant {p.variant} payload mismatch")
                    continue
                names.add(p.binding)
                if p.binding is not None:
                    binding_types.add(A.PtrType(v.payload))
            if len(names) > 1 or len(binding_types) > 1:
                self.err(s.line, "or-pattern alternatives must bind the same name and type")
            saved = dict(self.env)
            if names and None not in names:
                name = next(iter(names))
                if name in self.env and name not in self.bindings:
                    self.err(s.line, f"binding {name} shadows a variable")
                self.env[name] = next(iter(binding_types))
                self.bindings[name] = self.env[name]
            self.check_block(body)
            self.env = saved
        if isinstance(s, A.IfLet) and s.els:
            self.check_block(s.els)
        if isinstance(s, A.Match) and s.default:
            self.check_block(s.default)

    def expr(self, e: A.Expr) -> Optional[A.Type]:
        line = getattr(e, "line", 0)
        if isinstance(e, A.IntLit):
            return A.INT
        if isinstance(e, A.Null):
            return A.NULL
        if isinstance(e, A.Var):
            if e.name not in self.env:
                self.err(line, f"undeclared variable {e.name}")
                return None
            return self.env[e.name]
        if isinstance(e, A.FieldAccess):
            bt = self.expr(e.base)
            if bt is None:
                return None
            td = self.ctx.typedef(bt)
            if td is None or td.kind == "enum":
                self.err(line, f"type {bt} has no field {e.name}")
                return None
            ft = td.field_type(e.name)
            if ft is None:
                self.err(line, f"{td.name} has no field {e.name}")
            return ft
        if isinstance(e, A.Deref):
            t = self.expr(e.operand)
            if t is None:
                return None
            if not isinstance(t, A.PtrType):
                self.err(line, f"cannot dereference {t}")
                return None
            return t.target
        if isinstance(e, A.AddrOf):
            if not is_lvalue(e.operand):
                self.err(line, "cannot take the address of an rvalue")
            t = self.expr(e.operand)
            return A.PtrType(t) if t is not None else None
        if isinstance(e, A.New):
            self.check_type_exists(e.type, line)
            return A.PtrType(e.type)
        if isinstance(e, A.Call):
            fn = self.ctx.funcs.get(e.func)
            if fn is None or fn.owner is not None:
                self.err(line, f"unknown function {e.func}")
                for a in e.args:
                    self.expr(a)
                return None
            self.check_args(fn.params, e.args, line, e.func)
            return fn.ret
        if isinstance(e, A.MethodCall):
            if self.dialect != A.MINITAG:
                self.err(line, "dialect violation: method calls are not allowed in MiniC")
            if not is_lvalue(e.receiver):
                self.err(line, "method receiver must be an lvalue")
            rt = self.expr(e.receiver)
            if rt is None:
                return None
            fn = self.ctx.funcs.get(f"{rt}.{e.method}") if isinstance(rt, A.NamedType) else None
            if fn is None:
                self.err(line, f"type {rt} has no method {e.method}")
                return None
            self.check_args(fn.params, e.args, line, e.method)
            return fn.ret
        if isinstance(e, A.Unary):
            t = self.expr(e.operand)
            if t is not None:
                if e.op == "-" and t != A.INT:
                    self.err(line, "negation requires an integer")
                if e.op == "!" and not is_scalar(t):
                    self.err(line, "logical not requires a scalar")
            return A.INT
        if isinstance(e, A.Binary):
            lt, rt = self.expr(e.left), self.expr(e.right)
            if lt is None or rt is None:
                return A.INT
            if e.op in ("&&", "||"):
                if not (is_scalar(lt) and is_scalar(rt)):
                    self.err(line, f"operator {e.op} requires scalars")
            elif e.op in ("==", "!="):
                ok = (lt == rt == A.INT) or (
                    isinstance(lt, (A.PtrType, A.NullType)) and isinstance(rt, (A.PtrType, A.NullType))
                    and (compatible(lt, rt) or compatible(rt, lt)))
                if not ok:
                    self.err(line, f"cannot compare {lt} and {rt}")
            elif lt != A.INT or rt != A.INT:
                self.err(line, f"operator {e.op} requires integers")
            return A.INT
        if isinstance(e, A.Construct):
            if self.dialect != A.MINITAG:
                self.err(line, "dialect violation: variant construction is not allowed in MiniC")
            td = self.ctx.defs.get(e.enum)
            if td is None or td.kind != "enum":
                self.err(line, f"unknown enum {e.enum}")
                return None
            v = td.variant(e.variant)
            if v is None:
                self.err(line, f"unknown variant {e.variant} of {e.enum}")
                return None
            if (v.payload is None) != (e.payload is None):
                self.err(line, f"variant {e.variant} payload mismatch")
            elif e.payload is not None:
                pt = self.expr(e.payload)
                if pt is not None and not compatible(v.payload, pt):
                    self.err(line, f"variant {e.variant} expects {v.payload}, got {pt}")
            return A.NamedType(e.enum)
        self.err(line, f"unknown expression {type(e).__name__}")
        return None

    def check_args(self, params, args, line, name):
        if len(params) != len(args):
            self.err(line, f"{name} expects {len(params)} arguments, got {len(args)}")
        for p, a in zip(params, args):
            t = self.expr(a)
            if t is not None and not compatible(p.type, t):
                self.err(line, f"argument {p.name} of {name}: expected {p.type}, got {t}")
        for a in args[len(params):]:
            self.expr(a)


def check(program: A.Program, dialect: str = A.MINIC) -> None:
    Checker(program, dialect).check()

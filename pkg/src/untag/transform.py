"""Rewriting MiniC unions with inferred tags into MiniTag tagged unions.

Each transformed union becomes an enum with one variant per tag value.  Use
sites are rewritten idiomatically (``match``, ``if let``, one-shot variant
construction) where the code has a recognised shape, and through generated
helper methods everywhere else.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from . import ast as A
from .emit import MINITAG_HEADER, emit
from .heuristic import UnionResult
from .parser import parse_syntax
from .typecheck import TypeContext, check

IDIOMATIC_MATCH = "idiomatic-match"
IDIOMATIC_IF_LET = "idiomatic-if-let"
IDIOMATIC_OR_PATTERN = "idiomatic-or-pattern"
CONSOLIDATE = "consolidate-construction"
NAIVE_READ_TAG = "naive-read-tag"
NAIVE_GET = "naive-get"
NAIVE_SET_TAG = "naive-set-tag"
NAIVE_DEREF_MUT = "naive-deref-mut"

STRATEGIES = (IDIOMATIC_MATCH, IDIOMATIC_IF_LET, IDIOMATIC_OR_PATTERN, CONSOLIDATE,
              NAIVE_READ_TAG, NAIVE_GET, NAIVE_SET_TAG, NAIVE_DEREF_MUT)


def tag_suffix(tag: int) -> str:
    return f"m{-tag}" if tag < 0 else str(tag)


@dataclass
class Scheme:
    """How one union of one struct maps onto enum variants."""

    struct: str
    union_field: str
    enum: str
    tag_field: str
    tag_map: dict[int, Optional[str]]
    members: dict[str, A.Type]

    def variant(self, tag: int) -> str:
        return (self.tag_map[tag] or "Empty") + tag_suffix(tag)

    def tags_of(self, member: str) -> list[int]:
        return [t for t, f in self.tag_map.items() if f == member]

    def enum_def(self) -> A.TypeDef:
        variants = [A.Variant(self.variant(t), self.members[f] if f else None)
                    for t, f in sorted(self.tag_map.items())]
        names = [v.name for v in variants]
        assert len(set(names)) == len(names), names
        return A.TypeDef(self.enum, "enum", variants=variants)

    def pattern(self, tag: int, binding: Optional[str] = None) -> A.Pattern:
        if self.tag_map[tag] is None:
            return A.Pattern(self.enum, self.variant(tag))
        return A.Pattern(self.enum, self.variant(tag), True, binding)


def build_schemes(program: A.Program, results: list[UnionResult]) -> list[Scheme]:
    schemes: list[Scheme] = []
    used_tag_fields: set[tuple[str, str]] = set()
    for r in results:
        if r.tag_field is None or (r.struct, r.tag_field) in used_tag_fields:
            continue
        used_tag_fields.add((r.struct, r.tag_field))
        union_td = program.typedef(r.union_type)
        schemes.append(Scheme(r.struct, r.union_field, r.union_type, r.tag_field,
                              r.association.tag_map(),
                              {f.name: f.type for f in union_td.fields}))
    return schemes


# -- helper methods --------------------------------------------------------------


def _or_patterns(sc: Scheme, tags: list[int], bind: Optional[str]) -> str:
    parts = []
    for t in tags:
        v = f"{sc.enum}::{sc.variant(t)}"
        if sc.tag_map[t] is not None:
            v += f"(ref {bind})" if bind else "(_)"
        parts.append(v)
    return " | ".join(parts)


def helper_source(sc: Scheme) -> str:
    """MiniTag source of the helper methods for one scheme."""
    fs, e = sc.tag_field, sc.enum
    lines = [f"impl {sc.struct} {{", f"  int {fs}() {{", f"    match (self->{sc.union_field}) {{"]
    for t in sorted(sc.tag_map):
        lines.append(f"      {_or_patterns(sc, [t], None)} => {{ return {t}; }}")
    lines += ["    }", "    abort();", "  }", f"  void set_{fs}(int t) {{", "    switch (t) {"]
    for t in sorted(sc.tag_map):
        lines.append(f"      case {t}:")
        member = sc.tag_map[t]
        if member is None:
            lines.append(f"        self->{sc.union_field} = {e}::{sc.variant(t)};")
            continue
        tmp = f"p_{tag_suffix(t)}"
        lines.append(f"        {sc.members[member]} {tmp};")
        lines.append(f"        if let {_or_patterns(sc, sc.tags_of(member), 'x')} = "
                     f"(self->{sc.union_field}) {{ {tmp} = *x; }}")
        lines.append(f"        self->{sc.union_field} = {e}::{sc.variant(t)}({tmp});")
    lines += ["      default:", "        abort();", "    }", "  }", "}", "", f"impl {e} {{"]
    for member, ty in sc.members.items():
        tags = sorted(sc.tags_of(member))
        if not tags:
            lines += [f"  {ty} get_{member}() {{", "    abort();", "  }",
                      f"  {ty}* deref_{member}_mut() {{", "    abort();", "  }"]
            continue
        lines += [f"  {ty} get_{member}() {{",
                  f"    if let {_or_patterns(sc, tags, 'x')} = (*self) {{ return *x; }}",
                  "    abort();", "  }",
                  f"  {ty}* deref_{member}_mut() {{",
                  f"    if let {_or_patterns(sc, tags, None)} = (*self) {{",
                  "    } else {",
                  f"      {ty} d;",
                  f"      *self = {e}::{sc.variant(tags[0])}(d);",
                  "    }",
                  f"    if let {_or_patterns(sc, tags, 'x')} = (*self) {{ return x; }}",
                  "    abort();", "  }"]
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- use-site rewriting ----------------------------------------------------------


@dataclass
class Site:
    function: str
    line: int
    strategy: str

    def to_json(self) -> dict:
        return {"function": self.function, "line": self.line, "strategy": self.strategy}


def _int_const(e: A.Expr) -> Optional[int]:
    if isinstance(e, A.IntLit):
        return e.value
    if isinstance(e, A.Unary) and e.op == "-" and isinstance(e.operand, A.IntLit):
        return -e.operand.value
    return None


def _root_var(e: A.Expr) -> Optional[str]:
    while True:
        if isinstance(e, A.Var):
            return e.name
        if isinstance(e, A.FieldAccess):
            e = e.base
        elif isinstance(e, A.Deref):
            e = e.operand
        else:
            return None


class _FunctionRewriter:
    def __init__(self, tr: "Transformer", fn: A.FuncDef):
        self.tr = tr
        self.fn = fn
        self.env = tr.ctx.env(fn)
        self.names = set(self.env)
        self.subst: list[tuple[A.Expr, str, str, Scheme]] = []

    # -- classification --

    def struct_name(self, e: A.Expr) -> Optional[str]:
        try:
            t = self.tr.ctx.type_of(e, self.env)
        except Exception:
            return None
        return t.name if isinstance(t, A.NamedType) else None

    def tag_scheme(self, e: A.Expr) -> Optional[Scheme]:
        if isinstance(e, A.FieldAccess):
            return self.tr.by_tag.get((self.struct_name(e.base), e.name))
        return None

    def union_scheme(self, e: A.Expr) -> Optional[Scheme]:
        """Scheme if ``e`` is ``B.u`` for a transformed union ``u``."""
        if isinstance(e, A.FieldAccess):
            return self.tr.by_union.get((self.struct_name(e.base), e.name))
        return None

    def member_access(self, e: A.Expr):
        """``(scheme, B, member)`` if ``e`` is ``B.u.member``."""
        if isinstance(e, A.FieldAccess):
            sc = self.union_scheme(e.base)
            if sc is not None:
                return sc, e.base.base, e.name
        return None

    def is_pure_place(self, e: A.Expr) -> bool:
        if isinstance(e, A.Var):
            return True
        if isinstance(e, A.Deref):
            return self.is_pure_place(e.operand)
        if isinstance(e, A.FieldAccess):
            if self.tag_scheme(e) or self.union_scheme(e):
                return False
            return self.is_pure_place(e.base)
        return False

    def union_uses(self, e: A.Expr):
        """Yield ``("member", sc, B, f)`` and ``("whole", sc, B, None)`` uses in ``e``."""
        m = self.member_access(e)
        if m is not None:
            sc, base, member = m
            yield "member", sc, base, member
            yield from self.union_uses(base)
            return
        sc = self.union_scheme(e)
        if sc is not None:
            yield "whole", sc, e.base, None
            yield from self.union_uses(e.base)
            return
        for c in A.child_exprs(e):
            yield from self.union_uses(c)

    def body_allows_binding(self, body: A.Block, sc: Scheme, subject: A.Expr,
                            members: set[str]) -> Optional[set[str]]:
        """Union members of ``subject`` used in ``body``, or ``None`` if the body disqualifies."""
        root = _root_var(subject)
        used: set[str] = set()
        for s in A.walk_stmts(body):
            if isinstance(s, A.Assign):
                if self.tag_scheme(s.target) is sc or self.union_scheme(s.target) is sc:
                    return None
                if isinstance(s.target, A.Var) and s.target.name == root:
                    return None
            for e in A.stmt_exprs(s):
                for kind, usc, base, member in self.union_uses(e):
                    if usc is not sc:
                        continue
                    if kind == "whole" or base != subject or member not in members:
                        return None
                    used.add(member)
        return used

    def fresh(self, stem: str = "x") -> str:
        name, k = stem, 0
        while name in self.names:
            k += 1
            name = f"{stem}{k}"
        self.names.add(name)
        return name

    def log(self, line: int, strategy: str):
        self.tr.sites.append(Site(self.fn.qualname, line, strategy))

    # -- expressions --

    def expr(self, e: Optional[A.Expr], write: bool = False) -> Optional[A.Expr]:
        if e is None:
            return None
        line = getattr(e, "line", 0)
        if isinstance(e, A.FieldAccess):
            sc = self.tag_scheme(e)
            if sc is not None:
                self.log(line, NAIVE_READ_TAG)
                return A.MethodCall(self.expr(e.base), sc.tag_field, [], line=line)
            m = self.member_access(e)
            if m is not None:
                sc, base, member = m
                for subj, mem, name, ssc in reversed(self.subst):
                    if ssc is sc and subj == base and mem == member:
                        return A.Deref(A.Var(name, line=line), line=line)
                recv = A.FieldAccess(self.expr(base, write), sc.union_field, line=line)
                if write:
                    self.log(line, NAIVE_DEREF_MUT)
                    return A.Deref(A.MethodCall(recv, f"deref_{member}_mut", [], line=line), line=line)
                self.log(line, NAIVE_GET)
                return A.MethodCall(recv, f"get_{member}", [], line=line)
            return A.FieldAccess(self.expr(e.base, write), e.name, line=line)
        if isinstance(e, A.Deref):
            return A.Deref(self.expr(e.operand), line=line)
        if isinstance(e, A.AddrOf):
            inner = self.expr(e.operand, write=True)
            if isinstance(inner, A.Deref):
                return inner.operand
            return A.AddrOf(inner, line=line)
        if isinstance(e, A.Unary):
            return A.Unary(e.op, self.expr(e.operand), line=line)
        if isinstance(e, A.Binary):
            return A.Binary(e.op, self.expr(e.left), self.expr(e.right), line=line)
        if isinstance(e, A.Call):
            return A.Call(e.func, [self.expr(a) for a in e.args], line=line)
        if isinstance(e, A.MethodCall):
            return A.MethodCall(self.expr(e.receiver, True), e.method,
                                [self.expr(a) for a in e.args], line=line)
        if isinstance(e, A.Construct):
            return A.Construct(e.enum, e.variant, self.expr(e.payload), line=line)
        return copy.copy(e)

    # -- statements --

    def block(self, b: Optional[A.Block]) -> Optional[A.Block]:
        if b is None:
            return None
        out: list[A.Stmt] = []
        stmts = b.stmts
        i = 0
        while i < len(stmts):
            if i + 1 < len(stmts) and not self.tr.naive_only:
                merged = self.consolidate(stmts[i], stmts[i + 1])
                if merged is not None:
                    out.append(merged)
                    i += 2
                    continue
            out.extend(self.stmt(stmts[i]))
            i += 1
        return A.Block(out, line=b.line)

    def _tag_write(self, s: A.Stmt):
        if isinstance(s, A.Assign) and s.op == "=":
            sc = self.tag_scheme(s.target)
            k = _int_const(s.value)
            if sc is not None and k is not None and k in sc.tag_map and sc.tag_map[k] is not None:
                return sc, s.target.base, k
        return None

    def _member_write(self, s: A.Stmt):
        if isinstance(s, A.Assign) and s.op == "=":
            m = self.member_access(s.target)
            if m is not None:
                return m
        return None

    def _mentions_schemes(self, e: A.Expr) -> bool:
        for x in A.walk_expr(e):
            if isinstance(x, (A.Call, A.MethodCall)):
                return True
            if self.tag_scheme(x) or self.union_scheme(x):
                return True
        return False

    def consolidate(self, s1: A.Stmt, s2: A.Stmt) -> Optional[A.Stmt]:
        for tag_stmt, mem_stmt in ((s1, s2), (s2, s1)):
            tw, mw = self._tag_write(tag_stmt), self._member_write(mem_stmt)
            if tw is None or mw is None:
                continue
            sc, base, k = tw
            msc, mbase, member = mw
            if msc is not sc or mbase != base or sc.tag_map[k] != member:
                continue
            if not self.is_pure_place(base) or self._mentions_schemes(mem_stmt.value):
                continue
            if _root_var(base) in {x.name for x in A.walk_expr(mem_stmt.value) if isinstance(x, A.Var)} \
                    and tag_stmt is s1:
                continue
            line = s2.line
            self.log(line, CONSOLIDATE)
            target = A.FieldAccess(self.expr(base, True), sc.union_field, line=line)
            value = A.Construct(sc.enum, sc.variant(k), self.expr(mem_stmt.value), line=line)
            return A.Assign(target, "=", value, line=line)
        return None

    def stmt(self, s: A.Stmt) -> list[A.Stmt]:
        line = getattr(s, "line", 0)
        if isinstance(s, A.Block):
            return [self.block(s)]
        if isinstance(s, A.VarDecl):
            return [A.VarDecl(s.name, s.type, self.expr(s.init), line=line)]
        if isinstance(s, A.Assign):
            sc = self.tag_scheme(s.target)
            if sc is not None and s.op == "=":
                self.log(line, NAIVE_SET_TAG)
                value = self.expr(s.value)
                recv = self.expr(s.target.base, True)
                return [A.ExprStmt(A.MethodCall(recv, f"set_{sc.tag_field}", [value], line=line),
                                   line=line)]
            value = self.expr(s.value)
            return [A.Assign(self.expr(s.target, True), s.op, value, line=line)]
        if isinstance(s, A.ExprStmt):
            return [A.ExprStmt(self.expr(s.expr), line=line)]
        if isinstance(s, A.If):
            if not self.tr.naive_only:
                r = self.if_let(s)
                if r is not None:
                    return [r]
            return [A.If(self.expr(s.cond), self.block(s.then), self.block(s.els), line=line)]
        if isinstance(s, A.While):
            return [A.While(self.expr(s.cond), self.block(s.body), line=line)]
        if isinstance(s, A.Switch):
            if not self.tr.naive_only:
                r = self.match(s)
                if r is not None:
                    return [r]
            cases = [A.Case(c.value, self.block(c.body)) for c in s.cases]
            return [A.Switch(self.expr(s.subject), cases, self.block(s.default), line=line)]
        if isinstance(s, A.Return):
            return [A.Return(self.expr(s.value), line=line)]
        if isinstance(s, A.Print):
            return [A.Print(self.expr(s.value), line=line)]
        if isinstance(s, A.Abort):
            return [A.Abort(line=line)]
        raise TypeError(f"unexpected statement {s!r}")

    def with_binding(self, body: A.Block, subject: A.Expr, member: Optional[str],
                     name: Optional[str], sc: Scheme) -> A.Block:
        if member is None:
            return self.block(body)
        self.subst.append((subject, member, name, sc))
        try:
            return self.block(body)
        finally:
            self.subst.pop()

    def match(self, s: A.Switch) -> Optional[A.Match]:
        sc = self.tag_scheme(s.subject)
        if sc is None:
            return None
        subject = s.subject.base
        if not self.is_pure_place(subject):
            return None
        if any(c.value not in sc.tag_map for c in s.cases):
            return None
        plan = []
        for c in s.cases:
            member = sc.tag_map[c.value]
            used = self.body_allows_binding(c.body, sc, subject, {member} if member else set())
            if used is None:
                return None
            plan.append((c, member if used else None))
        arms = []
        for c, member in plan:
            name = self.fresh() if member else None
            pat = sc.pattern(c.value, name)
            arms.append(A.Arm([pat], self.with_binding(c.body, subject, member, name, sc)))
        covered = {c.value for c in s.cases}
        default = None
        if set(sc.tag_map) - covered:
            default = self.block(s.default) if s.default is not None else A.Block([])
        self.log(s.line, IDIOMATIC_MATCH)
        return A.Match(A.FieldAccess(self.expr(subject), sc.union_field, line=s.line),
                       arms, default, line=s.line)

    def _equalities(self, e: A.Expr, out: list):
        if isinstance(e, A.Binary) and e.op == "||":
            return self._equalities(e.left, out) and self._equalities(e.right, out)
        if isinstance(e, A.Binary) and e.op == "==":
            for a, b in ((e.left, e.right), (e.right, e.left)):
                sc, k = self.tag_scheme(a), _int_const(b)
                if sc is not None and k is not None:
                    out.append((sc, a.base, k))
                    return True
        return False

    def if_let(self, s: A.If) -> Optional[A.IfLet]:
        eqs: list = []
        if not self._equalities(s.cond, eqs):
            return None
        sc, subject = eqs[0][0], eqs[0][1]
        if any(x is not sc or b != subject for x, b, _ in eqs):
            return None
        if not self.is_pure_place(subject):
            return None
        tags = []
        for _, _, k in eqs:
            if k not in sc.tag_map:
                return None
            if k not in tags:
                tags.append(k)
        members = {sc.tag_map[k] for k in tags}
        used = self.body_allows_binding(s.then, sc, subject, members - {None})
        if used is None or (used and len(members) != 1):
            return None
        member = next(iter(used)) if used else None
        name = self.fresh() if member else None
        pats = [sc.pattern(k, name) for k in tags]
        self.log(s.line, IDIOMATIC_IF_LET if len(tags) == 1 else IDIOMATIC_OR_PATTERN)
        then = self.with_binding(s.then, subject, member, name, sc)
        return A.IfLet(pats, A.FieldAccess(self.expr(subject), sc.union_field, line=s.line),
                       then, self.block(s.els), line=s.line)

    def run(self) -> A.FuncDef:
        if self.fn.body is None:
            return self.fn
        body = self.block(self.fn.body)
        return A.FuncDef(self.fn.name, self.fn.ret, self.fn.params, body, self.fn.owner,
                         line=self.fn.line)


class Transformer:
    def __init__(self, program: A.Program, schemes: list[Scheme], naive_only: bool = False):
        self.program = program
        self.ctx = TypeContext(program)
        self.schemes = schemes
        self.naive_only = naive_only
        self.by_tag = {(sc.struct, sc.tag_field): sc for sc in schemes}
        self.by_union = {(sc.struct, sc.union_field): sc for sc in schemes}
        self.sites: list[Site] = []

    def types(self) -> list[A.TypeDef]:
        by_enum = {sc.enum: sc for sc in self.schemes}
        out = []
        for td in self.program.types:
            if td.name in by_enum:
                out.append(by_enum[td.name].enum_def())
                continue
            drop = {sc.tag_field for sc in self.schemes if sc.struct == td.name}
            if drop:
                td = A.TypeDef(td.name, td.kind, [f for f in td.fields if f.name not in drop],
                               td.anonymous, td.variants, line=td.line)
            out.append(td)
        return out

    def helpers(self, types: list[A.TypeDef]) -> list[A.FuncDef]:
        header = emit(A.Program(types, []), A.MINITAG)
        text = header + "".join(helper_source(sc) for sc in self.schemes)
        return parse_syntax(text, A.MINITAG).funcs

    def run(self) -> A.Program:
        types = self.types()
        helpers = self.helpers(types)
        funcs = [_FunctionRewriter(self, fn).run() for fn in self.program.funcs]
        return A.Program(types, helpers + funcs)


@dataclass
class TransformResult:
    text: str
    program: Optional[A.Program]
    schemes: list[Scheme] = field(default_factory=list)
    sites: list[Site] = field(default_factory=list)
    helper_calls: int = 0

    def strategy_counts(self) -> dict[str, int]:
        out = {s: 0 for s in STRATEGIES}
        for site in self.sites:
            out[site.strategy] += 1
        return out

    def log_json(self) -> dict:
        return {
            "helper_calls": self.helper_calls,
            "strategies": self.strategy_counts(),
            "sites": [s.to_json() for s in self.sites],
        }


def count_helper_calls(program: A.Program) -> int:
    """Method calls outside the generated helper methods."""
    n = 0
    for fn in program.funcs:
        if fn.owner is not None or fn.body is None:
            continue
        for s in A.walk_stmts(fn.body):
            for e in A.stmt_exprs(s):
                n += sum(isinstance(x, A.MethodCall) for x in A.walk_expr(e))
    return n


def transform(program: A.Program, results: list[UnionResult], source: Optional[str] = None,
              naive_only: bool = False) -> TransformResult:
    """Translate ``program`` to MiniTag using the inferred tag associations.

    Without any identified tag field the input is returned unchanged apart
    from the dialect header (``source`` verbatim when given).
    """
    schemes = build_schemes(program, results)
    if not schemes:
        text = MINITAG_HEADER + (source if source is not None else emit(program, A.MINIC))
        return TransformResult(text, program)
    tr = Transformer(program, schemes, naive_only)
    out = tr.run()
    check(out, A.MINITAG)
    text = emit(out, A.MINITAG)
    return TransformResult(text, out, schemes, tr.sites, count_helper_calls(out))

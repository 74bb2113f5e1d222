"""Syntax trees shared by the MiniC input dialect and the MiniTag output dialect.

Node equality is structural; source positions are carried in ``line`` fields
excluded from comparison so that re-parsed programs compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

MINIC = "minic"
MINITAG = "minitag"


# -- types -------------------------------------------------------------------


@dataclass(frozen=True)
class IntType:
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class VoidType:
    def __str__(self) -> str:
        return "void"


@dataclass(frozen=True)
class NullType:
    def __str__(self) -> str:
        return "null"


@dataclass(frozen=True)
class PtrType:
    target: "Type"

    def __str__(self) -> str:
        return f"{self.target}*"


@dataclass(frozen=True)
class NamedType:
    name: str

    def __str__(self) -> str:
        return self.name


Type = Union[IntType, VoidType, NullType, PtrType, NamedType]

INT = IntType()
VOID = VoidType()
NULL = NullType()


@dataclass
class Field:
    name: str
    type: Type


@dataclass
class Variant:
    name: str
    payload: Optional[Type] = None


@dataclass
class TypeDef:
    """A struct, union or (MiniTag only) enum definition.

    Anonymous unions are declared inline in a struct; they receive the
    synthesized name ``<struct>_<field>`` and ``anonymous=True``.
    """

    name: str
    kind: str  # "struct" | "union" | "enum"
    fields: list[Field] = field(default_factory=list)
    anonymous: bool = False
    variants: list[Variant] = field(default_factory=list)
    line: int = field(default=0, compare=False)

    def field_type(self, name: str) -> Optional[Type]:
        for f in self.fields:
            if f.name == name:
                return f.type
        return None

    def variant(self, name: str) -> Optional[Variant]:
        for v in self.variants:
            if v.name == name:
                return v
        return None


# -- expressions -------------------------------------------------------------


@dataclass
class IntLit:
    value: int
    line: int = field(default=0, compare=False)


@dataclass
class Null:
    line: int = field(default=0, compare=False)


@dataclass
class Var:
    name: str
    line: int = field(default=0, compare=False)


@dataclass
class FieldAccess:
    """``base.name``; ``p->name`` is ``FieldAccess(Deref(p), name)``."""

    base: "Expr"
    name: str
    line: int = field(default=0, compare=False)


@dataclass
class Deref:
    operand: "Expr"
    line: int = field(default=0, compare=False)


@dataclass
class AddrOf:
    operand: "Expr"
    line: int = field(default=0, compare=False)


@dataclass
class New:
    type: Type
    line: int = field(default=0, compare=False)


@dataclass
class Call:
    func: str
    args: list["Expr"]
    line: int = field(default=0, compare=False)


@dataclass
class MethodCall:
    receiver: "Expr"
    method: str
    args: list["Expr"]
    line: int = field(default=0, compare=False)


@dataclass
class Unary:
    op: str
    operand: "Expr"
    line: int = field(default=0, compare=False)


@dataclass
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = field(default=0, compare=False)


@dataclass
class Construct:
    enum: str
    variant: str
    payload: Optional["Expr"] = None
    line: int = field(default=0, compare=False)


Expr = Union[IntLit, Null, Var, FieldAccess, Deref, AddrOf, New, Call,
             MethodCall, Unary, Binary, Construct]


# -- patterns and statements -------------------------------------------------


@dataclass
class Pattern:
    """``Enum::variant``, ``Enum::variant(_)`` or ``Enum::variant(ref x)``."""

    enum: str
    variant: str
    has_payload: bool = False
    binding: Optional[str] = None


@dataclass
class Block:
    stmts: list["Stmt"] = field(default_factory=list)
    line: int = field(default=0, compare=False)


@dataclass
class VarDecl:
    name: str
    type: Type
    init: Optional[Expr] = None
    line: int = field(default=0, compare=False)


@dataclass
class Assign:
    target: Expr
    op: str  # "=", "+=", "-=", "*="
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass
class ExprStmt:
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass
class If:
    cond: Expr
    then: Block
    els: Optional[Block] = None
    line: int = field(default=0, compare=False)


@dataclass
class IfLet:
    patterns: list[Pattern]
    subject: Expr
    then: Block
    els: Optional[Block] = None
    line: int = field(default=0, compare=False)


@dataclass
class While:
    cond: Expr
    body: Block
    line: int = field(default=0, compare=False)


@dataclass
class Case:
    value: int
    body: Block


@dataclass
class Switch:
    subject: Expr
    cases: list[Case]
    default: Optional[Block] = None
    line: int = field(default=0, compare=False)


@dataclass
class Arm:
    patterns: list[Pattern]
    body: Block


@dataclass
class Match:
    subject: Expr
    arms: list[Arm]
    default: Optional[Block] = None
    line: int = field(default=0, compare=False)


@dataclass
class Return:
    value: Optional[Expr] = None
    line: int = field(default=0, compare=False)


@dataclass
class Print:
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass
class Abort:
    line: int = field(default=0, compare=False)


Stmt = Union[Block, VarDecl, Assign, ExprStmt, If, IfLet, While, Switch, Match,
             Return, Print, Abort]


@dataclass
class Param:
    name: str
    type: Type


@dataclass
class FuncDef:
    name: str
    ret: Type
    params: list[Param]
    body: Optional[Block]  # None for extern declarations
    owner: Optional[str] = None  # impl target for MiniTag methods
    line: int = field(default=0, compare=False)

    @property
    def qualname(self) -> str:
        return f"{self.owner}.{self.name}" if self.owner else self.name


@dataclass
class Program:
    types: list[TypeDef] = field(default_factory=list)
    funcs: list[FuncDef] = field(default_factory=list)

    def typedef(self, name: str) -> Optional[TypeDef]:
        for t in self.types:
            if t.name == name:
                return t
        return None

    def func(self, qualname: str) -> Optional[FuncDef]:
        for f in self.funcs:
            if f.qualname == qualname:
                return f
        return None


# -- traversal helpers -------------------------------------------------------


def child_exprs(e: Expr) -> list[Expr]:
    if isinstance(e, (FieldAccess,)):
        return [e.base]
    if isinstance(e, (Deref, AddrOf, Unary)):
        return [e.operand]
    if isinstance(e, Binary):
        return [e.left, e.right]
    if isinstance(e, Call):
        return list(e.args)
    if isinstance(e, MethodCall):
        return [e.receiver, *e.args]
    if isinstance(e, Construct):
        return [e.payload] if e.payload is not None else []
    return []


def walk_expr(e: Expr):
    yield e
    for c in child_exprs(e):
        yield from walk_expr(c)


def stmt_exprs(s: Stmt) -> list[Expr]:
    """Expressions appearing directly in ``s`` (not in nested blocks)."""
    if isinstance(s, VarDecl):
        return [s.init] if s.init is not None else []
    if isinstance(s, Assign):
        return [s.target, s.value]
    if isinstance(s, (ExprStmt,)):
        return [s.expr]
    if isinstance(s, (If, While)):
        return [s.cond]
    if isinstance(s, (IfLet, Switch, Match)):
        return [s.subject]
    if isinstance(s, (Return,)):
        return [s.value] if s.value is not None else []
    if isinstance(s, Print):
        return [s.value]
    return []


def sub_blocks(s: Stmt) -> list[Block]:
    if isinstance(s, Block):
        return [s]
    if isinstance(s, (If, IfLet)):
        return [s.then] + ([s.els] if s.els is not None else [])
    if isinstance(s, While):
        return [s.body]
    if isinstance(s, Switch):
        return [c.body for c in s.cases] + ([s.default] if s.default else [])
    if isinstance(s, Match):
        return [a.body for a in s.arms] + ([s.default] if s.default else [])
    return []


def walk_stmts(block: Block):
    for s in block.stmts:
        yield s
        for b in sub_blocks(s):
            yield from walk_stmts(b)

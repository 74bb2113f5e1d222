"""Control-flow-graph form of MiniC/MiniTag functions and the lowering pass.

Places are a local variable plus a projection path; the path element ``"*"``
is a dereference, ``"#v"`` selects the payload of enum variant ``v`` and any
other element is a field name.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import ast as A
from .typecheck import TypeContext

DEREF = "*"


@dataclass(frozen=True)
class Place:
    base: str
    proj: tuple[str, ...] = ()

    def __add__(self, steps: tuple[str, ...]) -> "Place":
        return Place(self.base, self.proj + tuple(steps))

    def __str__(self) -> str:
        text = self.base
        for p in self.proj:
            text = f"(*{text})" if p == DEREF else f"{text}.{p}"
        return text


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class NullConst:
    def __str__(self) -> str:
        return "null"


Operand = Union[Place, Const, NullConst]


@dataclass(frozen=True)
class Use:
    operand: Operand


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Operand
    right: Operand


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: Operand


@dataclass(frozen=True)
class Ref:
    place: Place


@dataclass(frozen=True)
class NewObj:
    type: A.Type


@dataclass(frozen=True)
class ZeroInit:
    type: A.Type


@dataclass(frozen=True)
class MakeVariant:
    enum: str
    variant: str
    payload: Optional[Operand] = None


Rvalue = Union[Use, BinOp, UnOp, Ref, NewObj, ZeroInit, MakeVariant]


@dataclass(frozen=True)
class Assign:
    dest: Place
    value: Rvalue
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CompoundAssign:
    dest: Place
    op: str
    operand: Operand
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CallInstr:
    dest: Optional[Place]
    callee: str
    args: tuple[Operand, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PrintInstr:
    operand: Operand
    line: int = field(default=0, compare=False)


Instruction = Union[Assign, CompoundAssign, CallInstr, PrintInstr]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Operand
    right: Operand


@dataclass(frozen=True)
class Truth:
    operand: Operand


@dataclass(frozen=True)
class Goto:
    target: int


@dataclass(frozen=True)
class Branch:
    cond: Union[Compare, Truth]
    then: int
    els: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SwitchTerm:
    operand: Operand
    cases: tuple[tuple[int, int], ...]
    default: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MatchTerm:
    place: Place
    cases: tuple[tuple[str, int], ...]
    default: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ReturnTerm:
    operand: Optional[Operand] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AbortTerm:
    line: int = field(default=0, compare=False)


Terminator = Union[Goto, Branch, SwitchTerm, MatchTerm, ReturnTerm, AbortTerm]


@dataclass
class BasicBlock:
    id: int
    instrs: list[Instruction] = field(default_factory=list)
    term: Optional[Terminator] = None


@dataclass
class Function:
    name: str
    params: list[str]
    locals: dict[str, A.Type]
    ret: A.Type
    blocks: list[BasicBlock] = field(default_factory=list)
    extern: bool = False
    entry: int = 0

    def successors(self, bid: int) -> list[int]:
        return successors(self.blocks[bid].term)

    def predecessors(self) -> dict[int, list[int]]:
        preds: dict[int, list[int]] = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for s in successors(b.term):
                preds[s].append(b.id)
        return preds

    def reachable(self) -> set[int]:
        seen, stack = set(), [self.entry] if self.blocks else []
        while stack:
            b = stack.pop()
            if b in seen:
                continue
            seen.add(b)
            stack.extend(self.successors(b))
        return seen

    def is_acyclic(self) -> bool:
        color: dict[int, int] = {}

        def visit(b: int) -> bool:
            color[b] = 1
            for s in self.successors(b):
                if color.get(s) == 1 or (s not in color and not visit(s)):
                    return False
            color[b] = 2
            return True

        return not self.blocks or visit(self.entry)

    def points(self):
        """All program points ``(block, index)``; index ``len(instrs)`` is the block end."""
        for b in self.blocks:
            for i in range(len(b.instrs) + 1):
                yield (b.id, i)


def successors(term: Optional[Terminator]) -> list[int]:
    if isinstance(term, Goto):
        return [term.target]
    if isinstance(term, Branch):
        return [term.then, term.els]
    if isinstance(term, SwitchTerm):
        return [t for _, t in term.cases] + [term.default]
    if isinstance(term, MatchTerm):
        return [t for _, t in term.cases] + [term.default]
    return []


@dataclass
class CFGProgram:
    ast: A.Program
    ctx: TypeContext
    functions: dict[str, Function]

    def place_type(self, fn: Function, place: Place) -> A.Type:
        t = fn.locals[place.base]
        for p in place.proj:
            t = self.step_type(t, p)
        return t

    def step_type(self, t: A.Type, step: str) -> A.Type:
        if step == DEREF:
            return t.target
        if step.startswith("#"):
            td = self.ctx.typedef(t)
            return td.variant(step[1:]).payload
        return self.ctx.field_type(t, step)


# -- instruction inspection ---------------------------------------------------


def rvalue_operands(rv: Rvalue) -> list[Operand]:
    if isinstance(rv, Use):
        return [rv.operand]
    if isinstance(rv, BinOp):
        return [rv.left, rv.right]
    if isinstance(rv, UnOp):
        return [rv.operand]
    if isinstance(rv, MakeVariant) and rv.payload is not None:
        return [rv.payload]
    return []


def accessed_places(item) -> list[Place]:
    """Places read, written or address-taken by an instruction or terminator."""
    ops: list = []
    if isinstance(item, Assign):
        ops = [item.dest, *rvalue_operands(item.value)]
        if isinstance(item.value, Ref):
            ops.append(item.value.place)
    elif isinstance(item, CompoundAssign):
        ops = [item.dest, item.operand]
    elif isinstance(item, CallInstr):
        ops = ([item.dest] if item.dest else []) + list(item.args)
    elif isinstance(item, PrintInstr):
        ops = [item.operand]
    elif isinstance(item, Branch):
        c = item.cond
        ops = [c.left, c.right] if isinstance(c, Compare) else [c.operand]
    elif isinstance(item, SwitchTerm):
        ops = [item.operand]
    elif isinstance(item, MatchTerm):
        ops = [item.place]
    elif isinstance(item, ReturnTerm) and item.operand is not None:
        ops = [item.operand]
    return [o for o in ops if isinstance(o, Place)]


# -- lowering ----------------------------------------------------------------


_COMPARE = {"==", "!=", "<", "<=", ">", ">="}


def _has_call(e: A.Expr) -> bool:
    return any(isinstance(x, (A.Call, A.MethodCall)) for x in A.walk_expr(e))


class _Lowerer:
    def __init__(self, ctx: TypeContext, fn: A.FuncDef):
        self.ctx = ctx
        self.fn = fn
        self.env = ctx.env(fn)
        self.locals: dict[str, A.Type] = dict(self.env)
        self.blocks: list[BasicBlock] = []
        self.ntemp = 0
        self.scopes: list[dict[str, str]] = []
        self.cur = self.new_block()

    def new_block(self) -> BasicBlock:
        b = BasicBlock(len(self.blocks))
        self.blocks.append(b)
        return b

    def emit(self, instr: Instruction):
        self.cur.instrs.append(instr)

    def terminate(self, term: Terminator):
        if self.cur.term is None:
            self.cur.term = term

    def goto(self, b: BasicBlock):
        self.terminate(Goto(b.id))
        self.cur = b

    def temp(self, t: A.Type) -> Place:
        name = f"$t{self.ntemp}"
        self.ntemp += 1
        self.locals[name] = t
        return Place(name)

    def rename(self, name: str) -> str:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return name

    def type_of(self, e: A.Expr) -> A.Type:
        return self.ctx.type_of(e, self.env)

    # -- expressions --

    def place(self, e: A.Expr) -> Place:
        if isinstance(e, A.Var):
            return Place(self.rename(e.name))
        if isinstance(e, A.FieldAccess):
            if isinstance(e.base, (A.Var, A.FieldAccess, A.Deref)):
                return self.place(e.base) + (e.name,)
            return self.operand(e.base) + (e.name,)
        if isinstance(e, A.Deref):
            op = self.operand(e.operand)
            return op + (DEREF,)
        op = self.operand(e)
        return op

    def pin(self, op: Operand, later: list[A.Expr], line: int) -> Operand:
        """Copy a deferred place read into a temp when later operands may have effects."""
        if isinstance(op, Place) and any(_has_call(x) for x in later):
            t = self.temp(self.locals_type(op))
            self.emit(Assign(t, Use(op), line))
            return t
        return op

    def locals_type(self, p: Place) -> A.Type:
        t = self.locals[p.base]
        for s in p.proj:
            if s == DEREF:
                t = t.target
            elif s.startswith("#"):
                t = self.ctx.typedef(t).variant(s[1:]).payload
            else:
                t = self.ctx.field_type(t, s)
        return t

    def operand(self, e: A.Expr) -> Operand:
        line = getattr(e, "line", 0)
        if isinstance(e, A.IntLit):
            return Const(e.value)
        if isinstance(e, A.Unary) and e.op == "-" and isinstance(e.operand, A.IntLit):
            return Const(-e.operand.value)
        if isinstance(e, A.Null):
            return NullConst()
        if isinstance(e, (A.Var, A.FieldAccess, A.Deref)):
            return self.place(e)
        if isinstance(e, A.Binary) and e.op in ("&&", "||"):
            t = self.temp(A.INT)
            yes, no, join = self.new_block(), self.new_block(), self.new_block()
            self.cond(e, yes, no)
            self.cur = yes
            self.emit(Assign(t, Use(Const(1)), line))
            self.goto(join)
            self.cur = no
            self.emit(Assign(t, Use(Const(0)), line))
            self.goto(join)
            return t
        if isinstance(e, A.Call) and self.ctx.funcs[e.func].ret == A.VOID:
            self.call(e, None)
            return Const(0)
        if isinstance(e, A.MethodCall) and self.type_of(e) == A.VOID:
            self.call(e, None)
            return Const(0)
        t = self.temp(self.type_of(e))
        self.emit_assign(t, e, line)
        return t

    def rvalue(self, e: A.Expr) -> Rvalue:
        line = getattr(e, "line", 0)
        if isinstance(e, A.AddrOf):
            return Ref(self.place(e.operand))
        if isinstance(e, A.New):
            return NewObj(e.type)
        if isinstance(e, A.Unary) and not (e.op == "-" and isinstance(e.operand, A.IntLit)):
            return UnOp(e.op, self.operand(e.operand))
        if isinstance(e, A.Binary) and e.op not in ("&&", "||"):
            left = self.pin(self.operand(e.left), [e.right], line)
            return BinOp(e.op, left, self.operand(e.right))
        if isinstance(e, A.Construct):
            payload = self.operand(e.payload) if e.payload is not None else None
            return MakeVariant(e.enum, e.variant, payload)
        return Use(self.operand(e))

    def emit_assign(self, dest: Place, e: A.Expr, line: int):
        if isinstance(e, (A.Call, A.MethodCall)):
            self.call(e, dest)
        else:
            self.emit(Assign(dest, self.rvalue(e), line))

    def args(self, exprs: list[A.Expr], line: int) -> list[Operand]:
        ops = []
        for i, a in enumerate(exprs):
            ops.append(self.pin(self.operand(a), exprs[i + 1:], line))
        return ops

    def call(self, e, dest: Optional[Place]):
        line = getattr(e, "line", 0)
        if isinstance(e, A.Call):
            self.emit(CallInstr(dest, e.func, tuple(self.args(e.args, line)), line))
            return
        owner = self.type_of(e.receiver)
        recv = self.place(e.receiver)
        self_ptr = self.temp(A.PtrType(owner))
        self.emit(Assign(self_ptr, Ref(recv), line))
        args = self.args(e.args, line)
        self.emit(CallInstr(dest, f"{owner.name}.{e.method}", (self_ptr, *args), line))

    def cond(self, e: A.Expr, yes: BasicBlock, no: BasicBlock):
        line = getattr(e, "line", 0)
        if isinstance(e, A.Binary) and e.op == "&&":
            mid = self.new_block()
            self.cond(e.left, mid, no)
            self.cur = mid
            self.cond(e.right, yes, no)
        elif isinstance(e, A.Binary) and e.op == "||":
            mid = self.new_block()
            self.cond(e.left, yes, mid)
            self.cur = mid
            self.cond(e.right, yes, no)
        elif isinstance(e, A.Unary) and e.op == "!":
            self.cond(e.operand, no, yes)
        elif isinstance(e, A.Binary) and e.op in _COMPARE:
            left = self.pin(self.operand(e.left), [e.right], line)
            right = self.operand(e.right)
            self.terminate(Branch(Compare(e.op, left, right), yes.id, no.id, line))
        else:
            self.terminate(Branch(Truth(self.operand(e)), yes.id, no.id, line))

    # -- statements --

    def block(self, b: A.Block):
        for s in b.stmts:
            self.stmt(s)

    def stmt(self, s: A.Stmt):
        line = getattr(s, "line", 0)
        if isinstance(s, A.Block):
            self.block(s)
        elif isinstance(s, A.VarDecl):
            dest = Place(s.name)
            if s.init is None:
                self.emit(Assign(dest, ZeroInit(s.type), line))
            else:
                self.emit_assign(dest, s.init, line)
        elif isinstance(s, A.Assign):
            if s.op == "=":
                if isinstance(s.value, (A.Call, A.MethodCall)):
                    value = self.operand(s.value)
                    self.emit(Assign(self.place(s.target), Use(value), line))
                else:
                    rv = self.rvalue(s.value)
                    self.emit(Assign(self.place(s.target), rv, line))
            else:
                value = self.operand(s.value)
                self.emit(CompoundAssign(self.place(s.target), s.op[0], value, line))
        elif isinstance(s, A.ExprStmt):
            e = s.expr
            ret = self.type_of(e)
            self.call(e, None if ret == A.VOID else self.temp(ret))
        elif isinstance(s, A.If):
            then = self.new_block()
            els = self.new_block() if s.els is not None else None
            join = self.new_block()
            self.cond(s.cond, then, els or join)
            self.cur = then
            self.block(s.then)
            self.terminate(Goto(join.id))
            if els is not None:
                self.cur = els
                self.block(s.els)
                self.terminate(Goto(join.id))
            self.cur = join
        elif isinstance(s, A.While):
            head, body, exit_ = self.new_block(), self.new_block(), self.new_block()
            self.goto(head)
            self.cond(s.cond, body, exit_)
            self.cur = body
            self.block(s.body)
            self.terminate(Goto(head.id))
            self.cur = exit_
        elif isinstance(s, A.Switch):
            op = self.operand(s.subject)
            case_blocks = [self.new_block() for _ in s.cases]
            default = self.new_block() if s.default is not None else None
            join = self.new_block()
            self.terminate(SwitchTerm(op, tuple((c.value, b.id) for c, b in zip(s.cases, case_blocks)),
                                      (default or join).id, line))
            for c, b in zip(s.cases, case_blocks):
                self.cur = b
                self.block(c.body)
                self.terminate(Goto(join.id))
            if default is not None:
                self.cur = default
                self.block(s.default)
                self.terminate(Goto(join.id))
            self.cur = join
        elif isinstance(s, (A.Match, A.IfLet)):
            self.pattern_stmt(s, line)
        elif isinstance(s, A.Return):
            op = self.operand(s.value) if s.value is not None else None
            self.terminate(ReturnTerm(op, line))
            self.cur = self.new_block()
        elif isinstance(s, A.Print):
            self.emit(PrintInstr(self.operand(s.value), line))
        elif isinstance(s, A.Abort):
            self.terminate(AbortTerm(line))
            self.cur = self.new_block()
        else:
            raise TypeError(f"cannot lower {s!r}")

    def pattern_stmt(self, s, line: int):
        place = self.place(s.subject)
        enum_td = self.ctx.typedef(self.locals_type(place))
        if isinstance(s, A.IfLet):
            arms = [(s.patterns, s.then)]
            default_body = s.els
        else:
            arms = [(a.patterns, a.body) for a in s.arms]
            default_body = s.default
        bodies = [self.new_block() for _ in arms]
        default = self.new_block() if default_body is not None else None
        join = self.new_block()
        cases: list[tuple[str, int]] = []
        arm_scopes = []
        for (pats, _), body in zip(arms, bodies):
            scope: dict[str, str] = {}
            for p in pats:
                if p.binding is None:
                    cases.append((p.variant, body.id))
                    continue
                payload = enum_td.variant(p.variant).payload
                internal = self.binding_local(p.binding, A.PtrType(payload))
                scope[p.binding] = internal
                binder = self.new_block()
                binder.instrs.append(Assign(Place(internal), Ref(place + ("#" + p.variant,)), line))
                binder.term = Goto(body.id)
                cases.append((p.variant, binder.id))
            arm_scopes.append((scope, pats, enum_td))
        self.terminate(MatchTerm(place, tuple(cases), (default or join).id, line))
        for ((_, blk), body, (scope, pats, td)) in zip(arms, bodies, arm_scopes):
            self.cur = body
            saved = dict(self.env)
            for p in pats:
                if p.binding is not None:
                    self.env[p.binding] = A.PtrType(td.variant(p.variant).payload)
            self.scopes.append(scope)
            self.block(blk)
            self.scopes.pop()
            self.env = saved
            self.terminate(Goto(join.id))
        if default is not None:
            self.cur = default
            self.block(default_body)
            self.terminate(Goto(join.id))
        self.cur = join

    def binding_local(self, name: str, t: A.Type) -> str:
        internal = name
        k = 0
        while internal in self.locals and self.locals[internal] != t:
            k += 1
            internal = f"{name}${k}"
        self.locals[internal] = t
        return internal

    def run(self) -> Function:
        self.block(self.fn.body)
        self.terminate(ReturnTerm(None, self.fn.line))
        self.blocks = _drop_unreachable(self.blocks)
        params = (["self"] if self.fn.owner else []) + [p.name for p in self.fn.params]
        return Function(self.fn.qualname, params, self.locals, self.fn.ret, self.blocks)


def _retarget(term: Terminator, ren: dict[int, int]) -> Terminator:
    if isinstance(term, Goto):
        return Goto(ren[term.target])
    if isinstance(term, Branch):
        return replace(term, then=ren[term.then], els=ren[term.els])
    if isinstance(term, (SwitchTerm, MatchTerm)):
        return replace(term, cases=tuple((k, ren[t]) for k, t in term.cases), default=ren[term.default])
    return term


def _drop_unreachable(blocks: list[BasicBlock]) -> list[BasicBlock]:
    """Remove blocks the entry cannot reach (dead code after return) and renumber."""
    seen, stack = set(), [0]
    while stack:
        b = stack.pop()
        if b not in seen:
            seen.add(b)
            stack.extend(successors(blocks[b].term))
    ren = {old: new for new, old in enumerate(sorted(seen))}
    return [BasicBlock(ren[b.id], b.instrs, _retarget(b.term, ren)) for b in blocks if b.id in seen]


def lower(program: A.Program) -> CFGProgram:
    """Lower every function body of a type-checked program to a CFG."""
    ctx = TypeContext(program)
    functions: dict[str, Function] = {}
    for fn in program.funcs:
        if fn.body is None:
            params = [p.name for p in fn.params]
            functions[fn.qualname] = Function(fn.qualname, params, {p.name: p.type for p in fn.params},
                                              fn.ret, [], extern=True)
        else:
            functions[fn.qualname] = _Lowerer(ctx, fn).run()
    return CFGProgram(program, ctx, functions)

"""Reference interpreter for lowered MiniC/MiniTag programs and the checks built on it.

Union storage is typed: a union cell keeps the value of its last-written
member only.  Reading any other member is a reinterpretation; in strict mode
that stops the run with ``reinterpretation-fault``, otherwise the stored
scalar is reused when it has the same kind (integer or pointer) as the member
read and a zero value is produced otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import ast as A
from .ir import (
    DEREF, AbortTerm, Assign, BinOp, Branch, CallInstr, CFGProgram, Compare, CompoundAssign,
    Const, Function, Goto, MakeVariant, MatchTerm, NewObj, NullConst, Place, PrintInstr, Ref,
    ReturnTerm, SwitchTerm, Truth, UnOp, Use, ZeroInit,
)
from .may_pta import _step_loc, local
from .must_pta import EPS, FunctionAnalysis

NORMAL = "normal"
ABORT = "abort"
FAULT = "reinterpretation-fault"
STEP_LIMIT = "step-limit"
DEFAULT_STEP_LIMIT = 1_000_000


@dataclass(frozen=True)
class Ptr:
    obj: int
    path: tuple[str, ...] = ()


@dataclass
class UnionCell:
    marker: Optional[str] = None
    value: object = None


@dataclass
class VariantVal:
    variant: str
    payload: object = None


@dataclass
class Outcome:
    output: tuple[int, ...]
    termination: str
    site: Optional[str] = None
    detail: Optional[str] = None
    steps: int = 0

    def to_json(self) -> dict:
        return {"output": list(self.output), "termination": self.termination,
                "site": self.site, "detail": self.detail}


class _Stop(Exception):
    def __init__(self, termination: str, detail: str):
        self.termination = termination
        self.detail = detail


def _copy(v):
    if isinstance(v, dict):
        return {k: _copy(x) for k, x in v.items()}
    if isinstance(v, UnionCell):
        return UnionCell(v.marker, _copy(v.value))
    if isinstance(v, VariantVal):
        return VariantVal(v.variant, _copy(v.payload))
    return v


def _scalar_kind(t: A.Type) -> Optional[str]:
    if isinstance(t, A.IntType):
        return "int"
    if isinstance(t, A.PtrType):
        return "ptr"
    return None


@dataclass
class Frame:
    fn: Function
    slots: dict[str, int]
    bid: int = 0
    idx: int = 0
    ret_dest: Optional[Place] = None


class Interpreter:
    def __init__(self, cfg: CFGProgram, strict: bool = True,
                 step_limit: int = DEFAULT_STEP_LIMIT,
                 observer: Optional[Callable[["Interpreter", Frame], None]] = None):
        self.cfg = cfg
        self.strict = strict
        self.step_limit = step_limit
        self.observer = observer
        self.store: dict[int, list] = {}  # obj -> [type, value]
        self.origins: dict[int, tuple] = {}  # obj -> abstract location of its creator
        self.output: list[int] = []
        self.frames: list[Frame] = []

    # -- values --

    def zero(self, t: A.Type):
        if isinstance(t, A.IntType):
            return 0
        if isinstance(t, A.PtrType):
            return None
        td = self.cfg.ctx.typedef(t)
        if td.kind == "struct":
            return {f.name: self.zero(f.type) for f in td.fields}
        if td.kind == "union":
            return UnionCell()
        first = td.variants[0]
        return VariantVal(first.name, self.zero(first.payload) if first.payload else None)

    def alloc(self, t: A.Type, value=None) -> int:
        obj = len(self.store)
        self.store[obj] = [t, self.zero(t) if value is None else value]
        return obj

    # -- addresses --

    def address(self, frame: Frame, place: Place) -> Ptr:
        addr = Ptr(frame.slots[place.base])
        for s in place.proj:
            if s == DEREF:
                p = self.load(addr)
                if p is None:
                    raise _Stop(ABORT, "null dereference")
                addr = p
            else:
                addr = Ptr(addr.obj, addr.path + (s,))
        return addr

    def _enter(self, container, t: A.Type, step: str, write: bool):
        """Child value of ``container`` (of type ``t``) at ``step``; returns (value, type)."""
        ct = self.cfg.step_type(t, step)
        if isinstance(container, dict):
            return container[step], ct
        if isinstance(container, UnionCell):
            if container.marker == step:
                return container.value, ct
            if write or container.marker is None:
                container.marker, container.value = step, self.zero(ct)
                return container.value, ct
            if self.strict:
                raise _Stop(FAULT, f"read of {step} while {container.marker} is active")
            old_t = self.cfg.step_type(t, container.marker)
            kind = _scalar_kind(ct)
            reused = container.value if kind is not None and kind == _scalar_kind(old_t) else self.zero(ct)
            return reused, ct
        if isinstance(container, VariantVal):
            if "#" + container.variant != step:
                raise _Stop(ABORT, f"access to inactive variant {step[1:]}")
            return container.payload, ct
        raise _Stop(ABORT, "invalid access")

    def load(self, addr: Ptr):
        t, v = self.store[addr.obj]
        for step in addr.path:
            v, t = self._enter(v, t, step, write=False)
        return v

    def store_at(self, addr: Ptr, value):
        entry = self.store[addr.obj]
        if not addr.path:
            entry[1] = value
            return
        t, v = entry
        for step in addr.path[:-1]:
            v, t = self._enter(v, t, step, write=True)
        last = addr.path[-1]
        if isinstance(v, dict):
            v[last] = value
        elif isinstance(v, UnionCell):
            v.marker, v.value = last, value
        elif isinstance(v, VariantVal):
            if "#" + v.variant != last:
                raise _Stop(ABORT, f"access to inactive variant {last[1:]}")
            v.payload = value
        else:
            raise _Stop(ABORT, "invalid access")

    def abstract(self, addr: Ptr) -> tuple:
        """The abstract location (as used by the may analysis) that ``addr`` falls in."""
        loc = self.origins[addr.obj]
        t = self.store[addr.obj][0]
        for step in addr.path:
            loc = _step_loc(self.cfg, loc, t, step)
            t = self.cfg.step_type(t, step)
        return loc

    # -- evaluation --

    def operand(self, frame: Frame, op):
        if isinstance(op, Const):
            return op.value
        if isinstance(op, NullConst):
            return None
        return _copy(self.load(self.address(frame, op)))

    @staticmethod
    def binop(op: str, a, b):
        if op == "==":
            return int(a == b)
        if op == "!=":
            return int(a != b)
        if op in ("/", "%"):
            if b == 0:
                raise _Stop(ABORT, "division by zero")
            q = abs(a) // abs(b)
            if (a < 0) != (b < 0):
                q = -q
            return q if op == "/" else a - b * q
        return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
                "<": lambda: int(a < b), "<=": lambda: int(a <= b),
                ">": lambda: int(a > b), ">=": lambda: int(a >= b)}[op]()

    def rvalue(self, frame: Frame, rv):
        if isinstance(rv, Use):
            return self.operand(frame, rv.operand)
        if isinstance(rv, BinOp):
            return self.binop(rv.op, self.operand(frame, rv.left), self.operand(frame, rv.right))
        if isinstance(rv, UnOp):
            v = self.operand(frame, rv.operand)
            return -v if rv.op == "-" else int(not v)
        if isinstance(rv, Ref):
            return self.address(frame, rv.place)
        if isinstance(rv, NewObj):
            obj = self.alloc(rv.type)
            self.origins[obj] = ("heap", frame.fn.name, frame.bid, frame.idx - 1)
            return Ptr(obj)
        if isinstance(rv, ZeroInit):
            return self.zero(rv.type)
        if isinstance(rv, MakeVariant):
            payload = self.operand(frame, rv.payload) if rv.payload is not None else None
            return VariantVal(rv.variant, payload)
        raise TypeError(rv)

    @staticmethod
    def truth(v) -> bool:
        return v is not None and v != 0

    def new_frame(self, fn: Function, args: list, ret_dest: Optional[Place]) -> Frame:
        slots = {}
        for name, t in fn.locals.items():
            slots[name] = self.alloc(t)
            self.origins[slots[name]] = local(fn.name, name)
        frame = Frame(fn, slots, fn.entry, 0, ret_dest)
        for name, v in zip(fn.params, args):
            self.store[slots[name]][1] = v
        return frame

    def run(self, entry: str, inputs: list[int]) -> Outcome:
        steps = 0
        fn = self.cfg.functions[entry]
        try:
            if fn.extern:
                raise _Stop(ABORT, f"call to external function {entry}")
            self.frames = [self.new_frame(fn, list(inputs), None)]
            while self.frames:
                frame = self.frames[-1]
                block = frame.fn.blocks[frame.bid]
                if self.observer is not None:
                    self.observer(self, frame)
                steps += 1
                if steps > self.step_limit:
                    return Outcome(tuple(self.output), STEP_LIMIT, frame.fn.name, None, steps)
                if frame.idx < len(block.instrs):
                    ins = block.instrs[frame.idx]
                    frame.idx += 1
                    self.execute(frame, ins)
                else:
                    self.terminate(frame, block.term)
        except _Stop as stop:
            site = self.frames[-1].fn.name if self.frames else entry
            return Outcome(tuple(self.output), stop.termination, site, stop.detail, steps)
        return Outcome(tuple(self.output), NORMAL, None, None, steps)

    def execute(self, frame: Frame, ins):
        if isinstance(ins, Assign):
            value = self.rvalue(frame, ins.value)
            self.store_at(self.address(frame, ins.dest), value)
        elif isinstance(ins, CompoundAssign):
            addr = self.address(frame, ins.dest)
            value = self.binop(ins.op, self.load(addr), self.operand(frame, ins.operand))
            self.store_at(addr, value)
        elif isinstance(ins, PrintInstr):
            self.output.append(self.operand(frame, ins.operand))
        elif isinstance(ins, CallInstr):
            callee = self.cfg.functions[ins.callee]
            if callee.extern:
                raise _Stop(ABORT, f"call to external function {ins.callee}")
            args = [self.operand(frame, a) for a in ins.args]
            self.frames.append(self.new_frame(callee, args, ins.dest))
        else:
            raise TypeError(ins)

    def jump(self, frame: Frame, target: int):
        frame.bid, frame.idx = target, 0

    def terminate(self, frame: Frame, term):
        if isinstance(term, Goto):
            self.jump(frame, term.target)
        elif isinstance(term, Branch):
            c = term.cond
            if isinstance(c, Compare):
                ok = self.binop(c.op, self.operand(frame, c.left), self.operand(frame, c.right))
            else:
                ok = self.truth(self.operand(frame, c.operand))
            self.jump(frame, term.then if ok else term.els)
        elif isinstance(term, SwitchTerm):
            v = self.operand(frame, term.operand)
            self.jump(frame, dict(term.cases).get(v, term.default))
        elif isinstance(term, MatchTerm):
            v = self.load(self.address(frame, term.place))
            self.jump(frame, dict(term.cases).get(v.variant, term.default))
        elif isinstance(term, ReturnTerm):
            value = self.operand(frame, term.operand) if term.operand is not None else None
            self.frames.pop()
            if self.frames and frame.ret_dest is not None:
                caller = self.frames[-1]
                self.store_at(self.address(caller, frame.ret_dest), value)
        elif isinstance(term, AbortTerm):
            raise _Stop(ABORT, "abort")
        else:
            raise TypeError(term)


def run(cfg: CFGProgram, entry: str, inputs: list[int], strict: bool = True,
        step_limit: int = DEFAULT_STEP_LIMIT, observer=None) -> Outcome:
    """Execute ``entry(inputs...)`` and report printed output and termination."""
    return Interpreter(cfg, strict, step_limit, observer).run(entry, inputs)


# -- differential testing --------------------------------------------------------


@dataclass
class Case:
    entry: str
    inputs: list[int]
    expected_output: Optional[list[int]] = None
    expected_termination: Optional[str] = None
    expected_abort_site: Optional[str] = None
    strict: bool = True

    @classmethod
    def from_json(cls, d: dict) -> "Case":
        return cls(d.get("entry", "main"), list(d.get("inputs", [])), d.get("expected_output"),
                   d.get("expected_termination"), d.get("expected_abort_site"),
                   d.get("strict", True))


@dataclass
class Verdict:
    case: Case
    original: Outcome
    transformed: Outcome
    equal: bool
    ok: bool

    def to_json(self) -> dict:
        return {"entry": self.case.entry, "inputs": self.case.inputs, "equal": self.equal,
                "ok": self.ok, "original": self.original.to_json(),
                "transformed": self.transformed.to_json()}


def same_behavior(a: Outcome, b: Outcome) -> bool:
    if a.output != b.output:
        return False
    return a.termination == b.termination or {a.termination, b.termination} == {FAULT, ABORT}


def case_ok(case: Case, original: Outcome, transformed: Outcome) -> bool:
    if case.expected_termination is not None:
        if transformed.termination != case.expected_termination:
            return False
        if case.expected_abort_site is not None and transformed.site != case.expected_abort_site:
            return False
        return case.expected_output is None or list(transformed.output) == case.expected_output
    if not same_behavior(original, transformed):
        return False
    return case.expected_output is None or list(original.output) == case.expected_output


def diff_test(original: CFGProgram, transformed: CFGProgram, cases: list[Case],
              step_limit: int = DEFAULT_STEP_LIMIT) -> list[Verdict]:
    out = []
    for c in cases:
        o = run(original, c.entry, c.inputs, strict=c.strict, step_limit=step_limit)
        t = run(transformed, c.entry, c.inputs, strict=True, step_limit=step_limit)
        out.append(Verdict(c, o, t, same_behavior(o, t), case_ok(c, o, t)))
    return out


# -- exhaustive enumeration ------------------------------------------------------


class DomainTooLarge(ValueError):
    def __init__(self, size: int, limit: int):
        super().__init__(f"input domain has {size} combinations, limit is {limit}")
        self.size = size
        self.limit = limit


def enumerate_executions(cfg: CFGProgram, entry: str, domains: list[list[int]],
                         limit: int = 4096, strict: bool = True,
                         step_limit: int = DEFAULT_STEP_LIMIT, observer=None):
    """Run ``entry`` on every input combination; returns ``[(inputs, Outcome)]``."""
    size = 1
    for d in domains:
        size *= len(d)
    if size > limit:
        raise DomainTooLarge(size, limit)
    results = []
    for inputs in itertools.product(*domains):
        results.append((list(inputs), run(cfg, entry, list(inputs), strict, step_limit, observer)))
    return results


# -- soundness of must-analysis results -------------------------------------------


@dataclass
class Violation:
    function: str
    point: tuple[int, int]
    message: str


@dataclass
class SoundnessChecker:
    """Observer that checks must-graphs against the concrete state at each visited point."""

    analyses: dict[str, FunctionAnalysis]
    violations: list[Violation] = field(default_factory=list)
    checked_points: int = 0

    def __call__(self, interp: Interpreter, frame: Frame):
        fa = self.analyses.get(frame.fn.name)
        if fa is None:
            return
        point = (frame.bid, frame.idx)
        g = fa.states.get(point)
        if g is None:
            self.violations.append(Violation(frame.fn.name, point, "reached point has no state"))
            return
        self.checked_points += 1
        binding: dict[int, tuple] = {}
        queue = []

        def bind(n: int, val: tuple, why: str):
            old = binding.get(n)
            if old is None:
                binding[n] = val
                queue.append(n)
            elif old != val:
                self.violations.append(Violation(frame.fn.name, point,
                                                 f"node {n} is both {old} and {val} ({why})"))

        for var, n in sorted(g.roots.items()):
            bind(n, ("loc", frame.slots[var], ()), f"root {var}")
        while queue:
            n = queue.pop(0)
            val = binding[n]
            if n in g.labels:
                vals = g.labels[n][0]
                if val[0] != "int" or val[1] not in vals:
                    self.violations.append(Violation(frame.fn.name, point,
                                                     f"node {n} labelled {sorted(vals)} holds {val}"))
            if val[0] != "loc":
                continue
            addr = Ptr(val[1], val[2])
            if n in g.written:
                try:
                    cell = interp.load(addr)
                except _Stop:
                    cell = None
                if isinstance(cell, UnionCell) and cell.marker != g.written[n]:
                    self.violations.append(Violation(
                        frame.fn.name, point,
                        f"union node {n} recorded {g.written[n]} but {cell.marker} is active"))
            for lab, m in sorted(g.edges.get(n, {}).items()):
                if lab != EPS:
                    bind(m, ("loc", val[1], val[2] + (lab,)), f"field {lab}")
                    continue
                saved = interp.strict
                interp.strict = True
                try:
                    v = interp.load(addr)
                except _Stop:
                    continue
                finally:
                    interp.strict = saved
                if isinstance(v, bool) or isinstance(v, int):
                    bind(m, ("int", int(v)), "value")
                elif v is None:
                    bind(m, ("null",), "value")
                elif isinstance(v, Ptr):
                    bind(m, ("loc", v.obj, v.path), "value")

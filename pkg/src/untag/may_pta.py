"""Field-sensitive, flow-insensitive inclusion-based may-points-to analysis.

Abstract locations are tuples:

* ``("local", function, variable)``
* ``("heap", function, block, index)`` for the object made by one ``new``
* ``("field", base, name)`` for a struct field of ``base``

Union members and enum payloads share the location of the enclosing union
or enum value, since they overlay the same storage.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import ast as A
from .ir import (
    DEREF, Assign, CallInstr, CFGProgram, Function, MakeVariant, NewObj, Place, Ref,
    ReturnTerm, Use,
)

Location = tuple
RET = "$ret"


class _Universal:
    """The set of all locations; returned when a callee's effects are unknown."""

    def __contains__(self, item) -> bool:
        return True

    def __repr__(self) -> str:
        return "UNIVERSAL"


UNIVERSAL = _Universal()


def local(fn: str, var: str) -> Location:
    return ("local", fn, var)


def is_within(loc: Location, root: Location) -> bool:
    """True if ``loc`` is ``root`` or a field (transitively) of ``root``."""
    while True:
        if loc == root:
            return True
        if loc[0] != "field":
            return False
        loc = loc[1]


def loc_str(loc: Location) -> str:
    if loc[0] == "local":
        return f"{loc[1]}::{loc[2]}"
    if loc[0] == "heap":
        return f"new@{loc[1]}:{loc[2]}:{loc[3]}"
    return f"{loc_str(loc[1])}.{loc[2]}"


@dataclass
class MayPointsTo:
    cfg: CFGProgram
    pts: dict[Location, frozenset] = field(default_factory=dict)

    def targets(self, loc: Location) -> frozenset:
        return self.pts.get(loc, frozenset())

    def place_locs(self, fn: str, place: Place) -> set[Location]:
        """Abstract locations a place may denote, evaluated against the final relation."""
        return _locs(self.cfg, self.cfg.functions[fn], place, self.targets)

    def to_json(self) -> dict:
        return {loc_str(k): sorted(loc_str(t) for t in v)
                for k, v in sorted(self.pts.items(), key=lambda kv: loc_str(kv[0])) if v}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _step_loc(cfg: CFGProgram, loc: Location, t: A.Type, step: str) -> Location:
    if step.startswith("#") or cfg.ctx.kind_of(t) == "union":
        return loc
    return ("field", loc, step)


def _locs(cfg: CFGProgram, fn: Function, place: Place,
          get: Callable[[Location], Iterable[Location]]) -> set[Location]:
    cur = {local(fn.name, place.base)}
    t = fn.locals[place.base]
    for step in place.proj:
        if step == DEREF:
            cur = {x for loc in cur for x in get(loc)}
        else:
            cur = {_step_loc(cfg, loc, t, step) for loc in cur}
        t = cfg.step_type(t, step)
    return cur


def _leaves(cfg: CFGProgram, t: A.Type, path=()):
    """Pointer-holding sub-paths of a value of type ``t`` as (path, type) pairs."""
    if isinstance(t, A.PtrType):
        yield path, t
        return
    td = cfg.ctx.typedef(t)
    if td is None:
        return
    if td.kind == "enum":
        for v in td.variants:
            if v.payload is not None:
                yield from _leaves(cfg, v.payload, path + ("#" + v.name,))
    else:
        for f in td.fields:
            yield from _leaves(cfg, f.type, path + (f.name,))


class _Solver:
    def __init__(self, cfg: CFGProgram):
        self.cfg = cfg
        self.pts: dict[Location, set] = defaultdict(set)
        self.deps: dict[Location, set[int]] = defaultdict(set)
        self.constraints: list[Callable[[], None]] = []
        self.current = -1
        self.queue: list[int] = []
        self.queued: set[int] = set()

    def get(self, loc: Location) -> set:
        self.deps[loc].add(self.current)
        return self.pts.get(loc, set())

    def add(self, loc: Location, targets: Iterable[Location]):
        have = self.pts[loc]
        new = [t for t in targets if t not in have]
        if not new:
            return
        have.update(new)
        for cid in self.deps.get(loc, ()):
            if cid not in self.queued:
                self.queued.add(cid)
                self.queue.append(cid)

    def locs(self, fn: Function, place: Place) -> set[Location]:
        return _locs(self.cfg, fn, place, self.get)

    def copy(self, dsts: set[Location], dst_type: A.Type, srcs: set[Location]):
        for path, _ in _leaves(self.cfg, dst_type):
            d_set, s_set, t = dsts, srcs, dst_type
            for step in path:
                d_set = {_step_loc(self.cfg, loc, t, step) for loc in d_set}
                s_set = {_step_loc(self.cfg, loc, t, step) for loc in s_set}
                t = self.cfg.step_type(t, step)
            vals = set()
            for s in s_set:
                vals |= self.get(s)
            for d in d_set:
                self.add(d, vals)

    def constrain(self, fn: Function, item, bid: int, idx: int):
        cfg = self.cfg
        if isinstance(item, Assign):
            rv = item.value

            def run():
                dsts = self.locs(fn, item.dest)
                if isinstance(rv, Ref):
                    targets = self.locs(fn, rv.place)
                    for d in dsts:
                        self.add(d, targets)
                elif isinstance(rv, NewObj):
                    for d in dsts:
                        self.add(d, [("heap", fn.name, bid, idx)])
                elif isinstance(rv, Use) and isinstance(rv.operand, Place):
                    self.copy(dsts, cfg.place_type(fn, item.dest), self.locs(fn, rv.operand))
                elif isinstance(rv, MakeVariant) and isinstance(rv.payload, Place):
                    enum = cfg.ctx.typedef(A.NamedType(rv.enum))
                    payload_t = enum.variant(rv.variant).payload
                    self.copy(dsts, payload_t, self.locs(fn, rv.payload))
            return run
        if isinstance(item, CallInstr):
            callee = cfg.functions.get(item.callee)
            if callee is None or callee.extern:
                return None

            def run():
                for pname, arg in zip(callee.params, item.args):
                    if isinstance(arg, Place):
                        self.copy({local(callee.name, pname)}, callee.locals[pname],
                                  self.locs(fn, arg))
                if item.dest is not None:
                    self.copy(self.locs(fn, item.dest), callee.ret, {local(callee.name, RET)})
            return run
        if isinstance(item, ReturnTerm) and isinstance(item.operand, Place):
            def run():
                self.copy({local(fn.name, RET)}, fn.ret, self.locs(fn, item.operand))
            return run
        return None

    def solve(self) -> dict[Location, frozenset]:
        for fn in self.cfg.functions.values():
            for b in fn.blocks:
                for idx, item in enumerate([*b.instrs, b.term]):
                    c = self.constrain(fn, item, b.id, idx)
                    if c is not None:
                        self.constraints.append(c)
        self.queue = list(range(len(self.constraints)))
        self.queued = set(self.queue)
        while self.queue:
            cid = self.queue.pop()
            self.queued.discard(cid)
            self.current = cid
            self.constraints[cid]()
        return {k: frozenset(v) for k, v in self.pts.items() if v}


def compute_may(cfg: CFGProgram) -> MayPointsTo:
    """Solve the inclusion constraints of every function body to a fixed point."""
    return MayPointsTo(cfg, _Solver(cfg).solve())


def _callees(cfg: CFGProgram, name: str) -> tuple[set[str], bool]:
    """Transitive callees of ``name`` (inclusive) and whether any is unknown."""
    seen, stack, unknown = set(), [name], False
    while stack:
        f = stack.pop()
        if f in seen:
            continue
        fn = cfg.functions.get(f)
        if fn is None or fn.extern:
            unknown = True
            continue
        seen.add(f)
        for b in fn.blocks:
            for ins in b.instrs:
                if isinstance(ins, CallInstr):
                    stack.append(ins.callee)
    return seen, unknown


def _dest_of(ins):
    if isinstance(ins, Assign):
        return ins.dest
    if isinstance(ins, CallInstr):
        return ins.dest
    return getattr(ins, "dest", None)


def may_written(call: CallInstr, may: MayPointsTo):
    """Locations the callee may write, transitively; ``UNIVERSAL`` if unknown.

    Writes to a callee's own variables touch a fresh frame and are invisible to
    the caller, so only writes through a pointer are reported.
    """
    funcs, unknown = _callees(may.cfg, call.callee)
    if unknown:
        return UNIVERSAL
    written: set[Location] = set()
    for name in funcs:
        fn = may.cfg.functions[name]
        for b in fn.blocks:
            for ins in b.instrs:
                dest = _dest_of(ins)
                if dest is not None and DEREF in dest.proj:
                    written |= may.place_locs(name, dest)
    return frozenset(written)

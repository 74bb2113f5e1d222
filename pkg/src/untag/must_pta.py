"""Intraprocedural must-points-to analysis with integer-set labels.

A graph node stands for one run-time location (or, for integers, one
run-time value).  An edge labelled ``""`` (epsilon) means "the value stored
here is the target": a pointer to the target location, or the integer the
target node stands for.  Any other label is a field step from an aggregate
location to the location of its member.  Integer value nodes may carry a
label ``@N``: the value is known to be a member of ``N``.  A missing label
means nothing is known about the value.

Union nodes additionally remember which member was written last, which is
what tag inference reads at block ends.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import ast as A
from .ir import (
    DEREF, Assign, Branch, CallInstr, CFGProgram, Compare, CompoundAssign, Const,
    Function, MakeVariant, NewObj, NullConst, Place, PrintInstr, Ref, SwitchTerm, Use, ZeroInit,
    BinOp, UnOp, successors,
)
from .may_pta import UNIVERSAL, MayPointsTo, _step_loc, is_within, local, may_written

EPS = ""
BRANCH = "branch"
ASSIGNMENT = "assignment"
DEFAULT_MAX_INT_SET = 64


@dataclass
class Graph:
    roots: dict[str, int] = field(default_factory=dict)
    edges: dict[int, dict[str, int]] = field(default_factory=dict)
    labels: dict[int, tuple[frozenset, str]] = field(default_factory=dict)
    written: dict[int, str] = field(default_factory=dict)
    next_id: int = 0

    # -- construction --

    @classmethod
    def initial(cls, variables) -> "Graph":
        g = cls()
        for v in sorted(variables):
            g.roots[v] = g.fresh()
        return g

    def fresh(self, label: Optional[tuple[frozenset, str]] = None) -> int:
        n = self.next_id
        self.next_id += 1
        self.edges[n] = {}
        if label is not None:
            self.labels[n] = label
        return n

    def copy(self) -> "Graph":
        return Graph(dict(self.roots), {n: dict(e) for n, e in self.edges.items()},
                     dict(self.labels), dict(self.written), self.next_id)

    def succ(self, n: int, label: str) -> Optional[int]:
        return self.edges.get(n, {}).get(label)

    def step(self, n: int, label: str) -> int:
        """Follow ``label`` from ``n``, creating an unconstrained target if absent."""
        t = self.succ(n, label)
        if t is None:
            t = self.fresh()
            self.edges[n][label] = t
        return t

    def location(self, place: Place) -> int:
        n = self.roots[place.base]
        for s in place.proj:
            n = self.step(n, EPS if s == DEREF else s)
        return n

    def value(self, place: Place) -> int:
        return self.step(self.location(place), EPS)

    def resolve(self, place: Place, value: bool = False) -> Optional[int]:
        """Like ``location``/``value`` but without materializing missing edges."""
        n = self.roots.get(place.base)
        steps = [EPS if s == DEREF else s for s in place.proj] + ([EPS] if value else [])
        for s in steps:
            if n is None:
                return None
            n = self.succ(n, s)
        return n

    # -- canonical form --

    def reachable_order(self) -> list[int]:
        order, seen = [], set()
        queue = deque(self.roots[v] for v in sorted(self.roots))
        while queue:
            n = queue.popleft()
            if n in seen:
                continue
            seen.add(n)
            order.append(n)
            for lab in sorted(self.edges.get(n, {})):
                queue.append(self.edges[n][lab])
        return order

    def _prune_blank_leaves(self):
        root_nodes = set(self.roots.values())
        changed = True
        while changed:
            changed = False
            indeg: dict[int, int] = {}
            for n in self.reachable_order():
                for t in self.edges.get(n, {}).values():
                    indeg[t] = indeg.get(t, 0) + 1
            for n in self.reachable_order():
                out = self.edges.get(n, {})
                for lab, t in list(out.items()):
                    if (t not in root_nodes and indeg.get(t) == 1 and not self.edges.get(t)
                            and t not in self.labels and t not in self.written):
                        del out[lab]
                        changed = True

    def canonical(self) -> "Graph":
        g = self.copy()
        g._prune_blank_leaves()
        order = g.reachable_order()
        ren = {n: i for i, n in enumerate(order)}
        return Graph(
            {v: ren[n] for v, n in g.roots.items()},
            {ren[n]: {lab: ren[t] for lab, t in g.edges.get(n, {}).items()} for n in order},
            {ren[n]: g.labels[n] for n in order if n in g.labels},
            {ren[n]: g.written[n] for n in order if n in g.written},
            len(order),
        )

    def key(self):
        c = self.canonical()
        return (tuple(sorted(c.roots.items())),
                tuple(sorted((n, tuple(sorted(e.items()))) for n, e in c.edges.items())),
                tuple(sorted((n, tuple(sorted(s)), p) for n, (s, p) in c.labels.items())),
                tuple(sorted(c.written.items())))

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def edge_list(self) -> list[tuple[int, str, int]]:
        return [(n, lab, t) for n in self.reachable_order() for lab, t in self.edges[n].items()]

    def is_functional(self) -> bool:
        # dict-of-dicts cannot hold two edges with one label; check no dangling targets
        return all(t in self.edges for _, _, t in self.edge_list())

    # -- debugging --

    def to_dot(self, name: str = "g") -> str:
        lines = [f'digraph "{name}" {{']
        for v, n in sorted(self.roots.items()):
            lines.append(f'  "var_{v}" [shape=plaintext,label="{v}"];')
            lines.append(f'  "var_{v}" -> n{n};')
        for n in self.reachable_order():
            text = f"n{n}"
            if n in self.labels:
                vals, prov = self.labels[n]
                text += "\\n@{" + ",".join(map(str, sorted(vals))) + "}" + ("" if prov == BRANCH else "'")
            if n in self.written:
                text += f"\\nlast={self.written[n]}"
            lines.append(f'  n{n} [label="{text}"];')
            for lab, t in sorted(self.edges[n].items()):
                lines.append(f'  n{n} -> n{t} [label="{lab or "ε"}"];')
        lines.append("}")
        return "\n".join(lines)


# -- join ------------------------------------------------------------------------


def join_product(g1: Graph, g2: Graph, max_int_set: int = DEFAULT_MAX_INT_SET):
    """Pair-node product of two graphs; returns the joined graph and the pair map."""
    out = Graph()
    pairs: dict[tuple[int, int], int] = {}
    queue: deque = deque()

    def node(a: int, b: int) -> int:
        if (a, b) not in pairs:
            pairs[(a, b)] = out.fresh()
            queue.append((a, b))
        return pairs[(a, b)]

    for v in sorted(set(g1.roots) & set(g2.roots)):
        out.roots[v] = node(g1.roots[v], g2.roots[v])
    while queue:
        a, b = queue.popleft()
        n = pairs[(a, b)]
        e1, e2 = g1.edges.get(a, {}), g2.edges.get(b, {})
        for lab in sorted(set(e1) & set(e2)):
            out.edges[n][lab] = node(e1[lab], e2[lab])
        if a in g1.labels and b in g2.labels:
            s1, p1 = g1.labels[a]
            s2, p2 = g2.labels[b]
            vals = s1 | s2
            if len(vals) <= max_int_set:
                out.labels[n] = (vals, BRANCH if p1 == p2 == BRANCH else ASSIGNMENT)
        if a in g1.written and g1.written[a] == g2.written.get(b):
            out.written[n] = g1.written[a]
    return out, pairs


def join(g1: Optional[Graph], g2: Optional[Graph], max_int_set: int = DEFAULT_MAX_INT_SET):
    if g1 is None:
        return g2.canonical() if g2 is not None else None
    if g2 is None:
        return g1.canonical()
    return join_product(g1, g2, max_int_set)[0].canonical()


# -- node typing and may-locations -------------------------------------------------


def node_info(g: Graph, fn: Function, cfg: CFGProgram, may: Optional[MayPointsTo]):
    """Static type of each reachable node and the abstract locations it may stand for.

    Integer value nodes have type ``None`` and no locations.
    """
    types: dict[int, Optional[A.Type]] = {}
    locs: dict[int, Optional[frozenset]] = {}
    queue = deque()
    for v in sorted(g.roots):
        n = g.roots[v]
        types[n] = fn.locals[v]
        locs[n] = frozenset({local(fn.name, v)})
        queue.append(n)
    seen = set()
    while queue:
        n = queue.popleft()
        if n in seen:
            continue
        seen.add(n)
        t, here = types[n], locs[n]
        for lab, m in sorted(g.edges.get(n, {}).items()):
            if lab == EPS:
                mt = t.target if isinstance(t, A.PtrType) else None
                if mt is None:
                    new = frozenset()
                elif may is None:
                    new = None
                else:
                    new = frozenset(x for l in here for x in may.targets(l))
            else:
                mt = cfg.step_type(t, lab) if t is not None else None
                new = frozenset(_step_loc(cfg, l, t, lab) for l in here) if here is not None else None
            if m not in types:
                types[m] = mt
                locs[m] = new
            elif locs[m] is None:
                locs[m] = new
            elif new is not None:
                locs[m] = locs[m] & new
            queue.append(m)
    return types, locs


# -- transfer --------------------------------------------------------------------


class _Snapshot:
    """The must-knowledge about a value about to be stored."""

    def __init__(self, kind: str, node: Optional[int] = None, children=None, marker=None):
        self.kind = kind  # "scalar" | "struct" | "union" | "unknown"
        self.node = node
        self.children = children or {}
        self.marker = marker


class Analyzer:
    def __init__(self, cfg: CFGProgram, fn: Function, may: MayPointsTo,
                 max_int_set: int = DEFAULT_MAX_INT_SET):
        self.cfg = cfg
        self.fn = fn
        self.may = may
        self.max_int_set = max_int_set

    def type_of(self, place: Place) -> A.Type:
        return self.cfg.place_type(self.fn, place)

    def is_scalar(self, t: A.Type) -> bool:
        return isinstance(t, (A.IntType, A.PtrType))

    def snapshot(self, g: Graph, loc: int, t: A.Type) -> _Snapshot:
        if self.is_scalar(t):
            return _Snapshot("scalar", g.step(loc, EPS))
        td = self.cfg.ctx.typedef(t)
        if td is None or td.kind == "enum":
            return _Snapshot("unknown")
        if td.kind == "struct":
            return _Snapshot("struct", children={
                f.name: self.snapshot(g, g.step(loc, f.name), f.type) for f in td.fields})
        marker = g.written.get(loc)
        if marker is None:
            return _Snapshot("union")
        return _Snapshot("union", marker=marker, children={
            marker: self.snapshot(g, g.step(loc, marker), td.field_type(marker))})

    def apply(self, g: Graph, loc: int, t: A.Type, snap: _Snapshot):
        if snap.kind == "scalar":
            g.edges[loc][EPS] = snap.node
        elif snap.kind == "struct":
            for name, child in snap.children.items():
                self.apply(g, g.step(loc, name), self.cfg.ctx.field_type(t, name), child)
        elif snap.kind == "union":
            g.edges[loc] = {}
            g.written.pop(loc, None)
            if snap.marker is not None:
                g.written[loc] = snap.marker
                self.apply(g, g.step(loc, snap.marker), self.cfg.ctx.field_type(t, snap.marker),
                           snap.children[snap.marker])
        else:
            g.edges[loc] = {}

    def rvalue_snapshot(self, g: Graph, rv, t: A.Type) -> _Snapshot:
        if isinstance(rv, Use):
            op = rv.operand
            if isinstance(op, Const):
                return _Snapshot("scalar", g.fresh((frozenset({op.value}), ASSIGNMENT)))
            if isinstance(op, NullConst):
                return _Snapshot("scalar", g.fresh())
            return self.snapshot(g, g.location(op), t)
        if isinstance(rv, Ref):
            return _Snapshot("scalar", g.location(rv.place))
        if isinstance(rv, (BinOp, UnOp, NewObj)):
            return _Snapshot("scalar", g.fresh())
        return _Snapshot("unknown")

    def invalidate(self, g: Graph, written, keep_roots: bool = True):
        """Drop facts about every location that may be overwritten by a write to ``written``."""
        if written is UNIVERSAL:
            for n in list(g.edges):
                g.edges[n] = {}
            g.written.clear()
            return
        _, locs = node_info(g, self.fn, self.cfg, self.may)
        for n, here in locs.items():
            if not here:
                continue
            if any(is_within(l, w) for l in here for w in written):
                g.edges[n] = {}
                g.written.pop(n, None)
            elif any(is_within(w, l) for l in here for w in written):
                g.edges[n].pop(EPS, None)
                g.written.pop(n, None)

    def write(self, g: Graph, dest: Place, snap: _Snapshot):
        self.invalidate(g, self.may.place_locs(self.fn.name, dest))
        # re-walk the destination; record union members written along its final segment
        n = g.roots[dest.base]
        t = self.fn.locals[dest.base]
        last_deref = max((i for i, s in enumerate(dest.proj) if s == DEREF), default=-1)
        for i, s in enumerate(dest.proj):
            if i > last_deref and self.cfg.ctx.kind_of(t) == "union":
                g.written[n] = s
                for other in [k for k in g.edges[n] if k != s]:
                    del g.edges[n][other]
            n = g.step(n, EPS if s == DEREF else s)
            t = self.cfg.step_type(t, s)
        self.apply(g, n, t, snap)

    def transfer(self, ins, state: Graph) -> Graph:
        g = state.copy()
        if isinstance(ins, Assign):
            t = self.type_of(ins.dest)
            if isinstance(ins.value, ZeroInit) or isinstance(ins.value, MakeVariant):
                snap = _Snapshot("unknown") if not self.is_scalar(t) else _Snapshot("scalar", g.fresh())
                self.write(g, ins.dest, snap)
                self.clear_subtree(g, ins.dest)
            else:
                self.write(g, ins.dest, self.rvalue_snapshot(g, ins.value, t))
        elif isinstance(ins, CompoundAssign):
            self.write(g, ins.dest, _Snapshot("scalar", g.fresh()))
        elif isinstance(ins, CallInstr):
            self.invalidate(g, may_written(ins, self.may))
            if ins.dest is not None:
                t = self.type_of(ins.dest)
                snap = _Snapshot("scalar", g.fresh()) if self.is_scalar(t) else _Snapshot("unknown")
                self.write(g, ins.dest, snap)
                if not self.is_scalar(t):
                    self.clear_subtree(g, ins.dest)
        elif isinstance(ins, PrintInstr):
            pass
        return g.canonical()

    def clear_subtree(self, g: Graph, dest: Place):
        n = g.location(dest)
        g.edges[n] = {}
        g.written.pop(n, None)

    # -- branch refinement --

    def refine(self, state: Graph, term, target: int, index: int) -> Optional[Graph]:
        """State flowing along the ``index``-th outgoing edge of ``term`` (to block ``target``).

        Returns ``None`` when the edge is infeasible under the current labels.
        """
        values = None
        subject = None
        if isinstance(term, Branch) and index == 0 and isinstance(term.cond, Compare) \
                and term.cond.op == "==":
            c = term.cond
            if isinstance(c.left, Place) and isinstance(c.right, Const):
                subject, values = c.left, {c.right.value}
            elif isinstance(c.right, Place) and isinstance(c.left, Const):
                subject, values = c.right, {c.left.value}
        elif isinstance(term, SwitchTerm) and index < len(term.cases) \
                and isinstance(term.operand, Place):
            subject, values = term.operand, {term.cases[index][0]}
        if subject is None:
            return state
        g = state.copy()
        n = g.value(subject)
        vals = frozenset(values)
        if n in g.labels:
            vals = vals & g.labels[n][0]
            if not vals:
                return None
        g.labels[n] = (vals, BRANCH)
        return g.canonical()


@dataclass
class FunctionAnalysis:
    function: Function
    states: dict[tuple[int, int], Graph]
    iterations: int = 0

    def block_end(self, bid: int) -> Optional[Graph]:
        n = len(self.function.blocks[bid].instrs)
        return self.states.get((bid, n))


class AnalysisDiverged(RuntimeError):
    pass


def analyze_function(cfg: CFGProgram, fn: Function, may: MayPointsTo,
                     max_int_set: int = DEFAULT_MAX_INT_SET,
                     max_iterations: int = 100_000) -> FunctionAnalysis:
    """Compute the must-points-to state before every instruction and at every block end."""
    an = Analyzer(cfg, fn, may, max_int_set)
    entry_state = Graph.initial(fn.locals).canonical()
    in_states: dict[int, Graph] = {fn.entry: entry_state}
    states: dict[tuple[int, int], Graph] = {}
    work = deque([fn.entry])
    queued = {fn.entry}
    iterations = 0
    while work:
        iterations += 1
        if iterations > max_iterations:
            raise AnalysisDiverged(f"no fixed point for {fn.name} after {max_iterations} steps")
        bid = work.popleft()
        queued.discard(bid)
        block = fn.blocks[bid]
        state = in_states[bid]
        for i, ins in enumerate(block.instrs):
            states[(bid, i)] = state
            state = an.transfer(ins, state)
        states[(bid, len(block.instrs))] = state
        for index, succ in enumerate(successors(block.term)):
            out = an.refine(state, block.term, succ, index)
            if out is None:
                continue
            old = in_states.get(succ)
            new = join(old, out, max_int_set)
            if old is None or new != old:
                in_states[succ] = new
                if succ not in queued:
                    queued.add(succ)
                    work.append(succ)
    return FunctionAnalysis(fn, states, iterations)


def analyze_program(cfg: CFGProgram, may: MayPointsTo, functions,
                    max_int_set: int = DEFAULT_MAX_INT_SET) -> dict[str, FunctionAnalysis]:
    return {name: analyze_function(cfg, cfg.functions[name], may, max_int_set)
            for name in sorted(functions)}


def dump_dot(analysis: FunctionAnalysis) -> str:
    parts = []
    for (bid, idx), g in sorted(analysis.states.items()):
        parts.append(g.to_dot(f"{analysis.function.name}:{bid}:{idx}"))
    return "\n".join(parts) + "\n"

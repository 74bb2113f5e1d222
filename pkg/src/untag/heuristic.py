"""Tag inference: decide which integer field tags a union, and with which values."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import ast as A
from .candidates import CandidateSet, field_steps
from .ir import CFGProgram, Place, accessed_places
from .must_pta import BRANCH, EPS, FunctionAnalysis, Graph, node_info

REJECT_ACCESSES = "conflict in accesses"
REJECT_STRUCTS = "conflict in structs"
REJECT_EMPTY = "no tag values observed"


@dataclass
class TagAssociation:
    field_tags: dict[str, set[int]] = field(default_factory=dict)
    access_tags: set[int] = field(default_factory=set)
    struct_tags: set[int] = field(default_factory=set)
    all_tags: set[int] = field(default_factory=set)
    rem_tags: set[int] = field(default_factory=set)

    def distinct(self) -> set[int]:
        out = set(self.rem_tags)
        for tags in self.field_tags.values():
            out |= tags
        return out

    def tag_map(self) -> dict[int, Optional[str]]:
        """Tag value to union field; ``None`` for values without a payload."""
        out: dict[int, Optional[str]] = {t: None for t in self.rem_tags}
        for f, tags in self.field_tags.items():
            for t in tags:
                out[t] = f
        return dict(sorted(out.items()))

    def to_json(self) -> dict:
        return {
            "field_tags": {f: sorted(t) for f, t in sorted(self.field_tags.items()) if t},
            "access_tags": sorted(self.access_tags),
            "struct_tags": sorted(self.struct_tags),
            "all_tags": sorted(self.all_tags),
            "rem_tags": sorted(self.rem_tags),
        }


@dataclass
class FieldOutcome:
    field: str
    association: Optional[TagAssociation] = None
    reason: Optional[str] = None

    @property
    def identified(self) -> bool:
        return self.association is not None


@dataclass
class UnionResult:
    struct: str
    union_field: str
    union_type: str
    tag_field: Optional[str] = None
    association: Optional[TagAssociation] = None
    outcomes: list[FieldOutcome] = field(default_factory=list)

    def to_json(self) -> dict:
        fields = {}
        for o in self.outcomes:
            entry = {"status": "identified" if o.identified else "rejected"}
            if o.identified:
                entry["distinct_tags"] = len(o.association.distinct())
            else:
                entry["reason"] = o.reason
            fields[o.field] = entry
        assoc = self.association.to_json() if self.association else None
        return {
            "struct": self.struct,
            "union": self.union_field,
            "tag_field": self.tag_field,
            "field_tags": assoc["field_tags"] if assoc else {},
            "rem_tags": assoc["rem_tags"] if assoc else [],
            "fields": fields,
        }


class _Context:
    """Shared view of the analyses with per-state node typing cached."""

    def __init__(self, cfg: CFGProgram, analyses: dict[str, FunctionAnalysis]):
        self.cfg = cfg
        self.analyses = analyses
        self._types: dict[int, dict] = {}

    def types(self, fa: FunctionAnalysis, g: Graph) -> dict:
        key = id(g)
        if key not in self._types:
            self._types[key] = (g, node_info(g, fa.function, self.cfg, None)[0])
        return self._types[key][1]

    def struct_nodes(self, fa: FunctionAnalysis, g: Graph, s: str) -> list[int]:
        want = A.NamedType(s)
        return [n for n, t in self.types(fa, g).items() if t == want]


def _label(g: Graph, node: Optional[int], f_s: str, branch_only: bool) -> set[int]:
    if node is None:
        return set()
    loc = g.succ(node, f_s)
    val = g.succ(loc, EPS) if loc is not None else None
    if val is None or val not in g.labels:
        return set()
    vals, prov = g.labels[val]
    if branch_only and prov != BRANCH:
        return set()
    return set(vals)


def _union_accesses(cfg: CFGProgram, fa: FunctionAnalysis, item, s: str, u: str):
    """Yield ``(struct_prefix_place, union_member)`` for accesses of ``s.u.<member>`` in ``item``."""
    for p in accessed_places(item):
        steps = list(field_steps(cfg, fa.function, p))
        for (owner, name, i), nxt in zip(steps, steps[1:] + [None]):
            if owner == s and name == u and nxt is not None and nxt[2] == i + 1:
                yield Place(p.base, p.proj[:i]), nxt[1]


def collect_from_accesses(ctx: _Context, s: str, u: str, f_s: str):
    field_tags: dict[str, set[int]] = {}
    all_tags: set[int] = set()
    for name in sorted(ctx.analyses):
        fa = ctx.analyses[name]
        for b in fa.function.blocks:
            items = [(i, ins) for i, ins in enumerate(b.instrs)] + [(len(b.instrs), b.term)]
            for i, item in items:
                g = fa.states.get((b.id, i))
                if g is None:
                    continue
                for prefix, f_u in _union_accesses(ctx.cfg, fa, item, s, u):
                    n = _label(g, g.resolve(prefix), f_s, branch_only=True)
                    tags = n - field_tags.get(f_u, set())
                    if all_tags & tags:
                        return None
                    field_tags.setdefault(f_u, set()).update(tags)
                    all_tags |= tags
    return field_tags, all_tags


def collect_from_structs(ctx: _Context, s: str, u: str, f_s: str) -> dict[str, set[int]]:
    field_tags: dict[str, set[int]] = {}
    for name in sorted(ctx.analyses):
        fa = ctx.analyses[name]
        for b in fa.function.blocks:
            g = fa.block_end(b.id)
            if g is None:
                continue
            for v in ctx.struct_nodes(fa, g, s):
                un = g.succ(v, u)
                f_u = g.written.get(un) if un is not None else None
                if f_u is not None:
                    field_tags.setdefault(f_u, set()).update(_label(g, v, f_s, branch_only=False))
    return field_tags


def collect_all_tags(ctx: _Context, s: str, u: str, f_s: str) -> set[int]:
    out: set[int] = set()
    for name in sorted(ctx.analyses):
        fa = ctx.analyses[name]
        for g in fa.states.values():
            for v in ctx.struct_nodes(fa, g, s):
                out |= _label(g, v, f_s, branch_only=False)
    return out


def identify_tags(ctx: _Context, s: str, u: str, f_s: str, members: list[str]):
    """Returns ``(TagAssociation, None)`` on success or ``(None, reason)``."""
    res = collect_from_accesses(ctx, s, u, f_s)
    if res is None:
        return None, REJECT_ACCESSES
    field_tags, access_tags = res
    from_structs = collect_from_structs(ctx, s, u, f_s)
    struct_tags: set[int] = set()
    for f_u in members:
        tags = from_structs.get(f_u, set()) - access_tags
        if struct_tags & tags:
            return None, REJECT_STRUCTS
        field_tags[f_u] = field_tags.get(f_u, set()) | tags
        struct_tags |= tags
    field_tags = {f: t for f, t in field_tags.items() if t}
    if not field_tags:
        return None, REJECT_EMPTY
    all_tags = collect_all_tags(ctx, s, u, f_s)
    rem = all_tags - (access_tags | struct_tags)
    return TagAssociation(field_tags, set(access_tags), struct_tags, all_tags, rem), None


def infer_tags(cfg: CFGProgram, candidates: CandidateSet,
               analyses: dict[str, FunctionAnalysis]) -> list[UnionResult]:
    """Run identification for every candidate union and pick its tag field."""
    ctx = _Context(cfg, analyses)
    results = []
    for s, u in sorted(candidates.unions):
        struct = cfg.ast.typedef(s)
        union_td = cfg.ctx.typedef(struct.field_type(u))
        members = [f.name for f in union_td.fields]
        res = UnionResult(s, u, union_td.name)
        for f_s in candidates.eligible_fields[s]:
            assoc, reason = identify_tags(ctx, s, u, f_s, members)
            res.outcomes.append(FieldOutcome(f_s, assoc, reason))
        best = None
        for o in res.outcomes:
            if o.identified and (best is None or len(o.association.distinct()) > len(best.association.distinct())):
                best = o
        if best is not None:
            res.tag_field = best.field
            res.association = best.association
        results.append(res)
    return results

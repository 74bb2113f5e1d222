"""Selection of candidate structs, unions, tag-eligible fields and functions."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast as A
from .ir import CFGProgram, CompoundAssign, DEREF, Function, Place, Ref, accessed_places


@dataclass
class CandidateSet:
    structs: set[str] = field(default_factory=set)
    unions: set[tuple[str, str]] = field(default_factory=set)
    eligible_fields: dict[str, list[str]] = field(default_factory=dict)
    functions: set[str] = field(default_factory=set)

    def is_empty(self) -> bool:
        return not self.structs

    def to_json(self) -> dict:
        return {
            "structs": sorted(self.structs),
            "unions": [list(u) for u in sorted(self.unions)],
            "eligible_fields": {s: list(fs) for s, fs in sorted(self.eligible_fields.items())},
            "functions": sorted(self.functions),
        }


def field_steps(cfg: CFGProgram, fn: Function, place: Place):
    """Yield ``(owner_type_name, field_name, prefix_length)`` for each field step of ``place``."""
    t = fn.locals[place.base]
    for i, step in enumerate(place.proj):
        if step != DEREF and not step.startswith("#") and isinstance(t, A.NamedType):
            yield t.name, step, i
        t = cfg.step_type(t, step)


def _last_field(cfg: CFGProgram, fn: Function, place: Place):
    steps = list(field_steps(cfg, fn, place))
    if steps and steps[-1][2] == len(place.proj) - 1:
        return steps[-1][:2]
    return None


def _disqualified(cfg: CFGProgram) -> set[tuple[str, str]]:
    """Struct fields that are compound-assigned or have their address taken."""
    bad: set[tuple[str, str]] = set()
    for fn in cfg.functions.values():
        for b in fn.blocks:
            for ins in b.instrs:
                target = None
                if isinstance(ins, CompoundAssign):
                    target = ins.dest
                elif hasattr(ins, "value") and isinstance(ins.value, Ref):
                    target = ins.value.place
                if target is not None:
                    hit = _last_field(cfg, fn, target)
                    if hit is not None:
                        bad.add(hit)
    return bad


def tag_eligible_fields(struct: A.TypeDef, cfg: CFGProgram) -> list[str]:
    """Integer fields of ``struct`` that are only ever assigned with ``=`` and never address-taken."""
    bad = _disqualified(cfg)
    return [f.name for f in struct.fields
            if f.type == A.INT and (struct.name, f.name) not in bad]


def _uses_struct(cfg: CFGProgram, fn: Function, structs: set[str]) -> bool:
    for b in fn.blocks:
        for item in [*b.instrs, b.term]:
            for p in accessed_places(item):
                if any(owner in structs for owner, _, _ in field_steps(cfg, fn, p)):
                    return True
    return False


def collect_candidates(cfg: CFGProgram) -> CandidateSet:
    prog = cfg.ast
    bad = _disqualified(cfg)
    out = CandidateSet()
    for td in prog.types:
        if td.kind != "struct":
            continue
        eligible = [f.name for f in td.fields if f.type == A.INT and (td.name, f.name) not in bad]
        if not eligible:
            continue
        for f in td.fields:
            inner = prog.typedef(f.type.name) if isinstance(f.type, A.NamedType) else None
            if inner is not None and inner.kind == "union" and inner.anonymous:
                out.unions.add((td.name, f.name))
                out.structs.add(td.name)
        if td.name in out.structs:
            out.eligible_fields[td.name] = eligible
    if out.structs:
        out.functions = {name for name, fn in cfg.functions.items()
                         if not fn.extern and _uses_struct(cfg, fn, out.structs)}
    return out

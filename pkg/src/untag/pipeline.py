"""End-to-end analysis pipeline and the JSON report built from it."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from . import ast as A
from .candidates import CandidateSet, collect_candidates
from .heuristic import UnionResult, infer_tags
from .ir import CFGProgram, lower
from .may_pta import MayPointsTo, compute_may
from .must_pta import DEFAULT_MAX_INT_SET, FunctionAnalysis, analyze_program
from .parser import parse
from .transform import TransformResult, transform


@dataclass
class Analysis:
    source: str
    program: A.Program
    cfg: CFGProgram
    candidates: CandidateSet
    may: Optional[MayPointsTo] = None
    analyses: dict[str, FunctionAnalysis] = field(default_factory=dict)
    unions: list[UnionResult] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)

    def union(self, struct: str, union_field: str) -> Optional[UnionResult]:
        for u in self.unions:
            if (u.struct, u.union_field) == (struct, union_field):
                return u
        return None


def analyze_source(source: str, max_int_set: int = DEFAULT_MAX_INT_SET) -> Analysis:
    """Parse, lower and analyze a MiniC program.

    When no candidate struct exists the later phases are skipped.
    """
    timing = {}
    t0 = time.perf_counter()
    program = parse(source, A.MINIC)
    cfg = lower(program)
    timing["frontend"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    candidates = collect_candidates(cfg)
    timing["candidates"] = time.perf_counter() - t0
    result = Analysis(source, program, cfg, candidates, timing=timing)
    if candidates.is_empty():
        return result
    t0 = time.perf_counter()
    result.may = compute_may(cfg)
    timing["may_pta"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    result.analyses = analyze_program(cfg, result.may, candidates.functions, max_int_set)
    timing["must_pta"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    result.unions = infer_tags(cfg, candidates, result.analyses)
    timing["heuristic"] = time.perf_counter() - t0
    return result


def transform_analysis(analysis: Analysis, naive_only: bool = False) -> TransformResult:
    t0 = time.perf_counter()
    out = transform(analysis.program, analysis.unions, analysis.source, naive_only)
    analysis.timing["transform" + ("_naive" if naive_only else "")] = time.perf_counter() - t0
    return out


def build_report(analysis: Analysis, transformed: Optional[TransformResult] = None) -> dict:
    total = sum(1 for f in analysis.cfg.functions.values() if not f.extern)
    analyzed = len(analysis.analyses)
    report = {
        "candidates": analysis.candidates.to_json(),
        "unions": [u.to_json() for u in analysis.unions],
        "functions": {
            "total": total,
            "analyzed": analyzed,
            "percent": round(100.0 * analyzed / total, 2) if total else 0.0,
        },
        "strategies": transformed.strategy_counts() if transformed else {},
        "helper_calls": transformed.helper_calls if transformed else 0,
        "timing": {k: round(v, 6) for k, v in sorted(analysis.timing.items())},
    }
    return report

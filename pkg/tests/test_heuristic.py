import pytest

from untag.heuristic import (
    REJECT_ACCESSES, REJECT_EMPTY, REJECT_STRUCTS, _Context, collect_all_tags,
    collect_from_accesses, collect_from_structs, identify_tags,
)
from untag.pipeline import analyze_source

from conftest import annotations, corpus_analysis, corpus_programs


def _ctx(name: str) -> _Context:
    a = corpus_analysis(name)
    return _Context(a.cfg, a.analyses)


def _ctx_src(source: str) -> _Context:
    a = analyze_source(source)
    return _Context(a.cfg, a.analyses)


def _members(ctx: _Context, s: str, u: str) -> list[str]:
    struct = ctx.cfg.ast.typedef(s)
    return [f.name for f in ctx.cfg.ctx.typedef(struct.field_type(u)).fields]


def _union_results():
    for name in corpus_programs():
        for r in corpus_analysis(name).unions:
            yield name, r


ASSIGN_ONLY = """
struct T {
  int kind;
  union { int a; T* b; } u;
};

int get(T* t) {
  t->kind = 1;
  return t->u.a;
}
"""

NO_STRUCT_AT_END = """
struct T {
  int kind;
  union { int a; T* b; } u;
};

int twice(int x) {
  return x + x;
}

int get(T* t) {
  if (t->kind == 1) {
    return t->u.a;
  }
  return 0;
}
"""


# -- collect_from_accesses --


def test_expr_accesses():
    field_tags, access_tags = collect_from_accesses(_ctx("expr"), "Expr", "v", "kind")
    assert field_tags == {"e": {1}, "b": {2, 3}}
    assert access_tags == {1, 2, 3}


def test_same_tag_for_two_fields_is_rejected():
    assert collect_from_accesses(_ctx("same_value_conflict"), "V", "u", "kind") is None


def test_assignment_labels_do_not_count_at_accesses():
    field_tags, access_tags = collect_from_accesses(_ctx_src(ASSIGN_ONLY), "T", "u", "kind")
    assert access_tags == set()
    assert all(not t for t in field_tags.values())


# -- collect_from_structs --


def test_constructor_records_last_written_member():
    from_structs = collect_from_structs(_ctx("expr"), "Expr", "v", "kind")
    assert from_structs["b"] >= {2}
    assert from_structs["e"] >= {1}


def test_intermediate_state_is_seen_by_structs():
    from_structs = collect_from_structs(_ctx("intermediate"), "Expr", "v", "kind")
    assert 2 in from_structs["e"]


def test_no_struct_at_block_end_contributes_nothing():
    ctx = _ctx_src(NO_STRUCT_AT_END)
    assert collect_from_structs(ctx, "T", "u", "kind") == {}


# -- collect_all_tags --


def test_all_tags_include_constructor_values():
    assert 0 in collect_all_tags(_ctx("expr"), "Expr", "v", "kind")


def test_all_tags_empty_without_labels():
    ctx = _ctx("no_tag_counter")
    assert collect_all_tags(ctx, "Slot", "s", "uses") == set()


@pytest.mark.parametrize("name", corpus_programs())
def test_all_tags_contain_access_tags(name):
    a = corpus_analysis(name)
    ctx = _Context(a.cfg, a.analyses)
    for s, u in a.candidates.unions:
        for f_s in a.candidates.eligible_fields[s]:
            res = collect_from_accesses(ctx, s, u, f_s)
            if res is not None:
                assert res[1] <= collect_all_tags(ctx, s, u, f_s)


# -- identify_tags and selection --


def test_identify_expr():
    ctx = _ctx("expr")
    assoc, reason = identify_tags(ctx, "Expr", "v", "kind", _members(ctx, "Expr", "v"))
    assert reason is None
    assert assoc.field_tags == {"e": {1}, "b": {2, 3}}
    assert assoc.rem_tags == {0}
    assert assoc.tag_map() == {0: None, 1: "e", 2: "b", 3: "b"}


def test_identify_suppresses_intermediate_association():
    ctx = _ctx("intermediate")
    assoc, _ = identify_tags(ctx, "Expr", "v", "kind", _members(ctx, "Expr", "v"))
    assert assoc.field_tags == {"e": {1}, "b": {2}}


def test_struct_collision_is_rejected():
    ctx = _ctx("multi_union")
    assoc, reason = identify_tags(ctx, "Shape", "b", "k1", _members(ctx, "Shape", "b"))
    assert assoc is None and reason == REJECT_STRUCTS


def test_rejection_reasons():
    ctx = _ctx("same_value_conflict")
    assert identify_tags(ctx, "V", "u", "kind", _members(ctx, "V", "u")) == (None, REJECT_ACCESSES)
    ctx = _ctx("caller_tag")
    assert identify_tags(ctx, "Addr", "a", "family", _members(ctx, "Addr", "a")) == (None, REJECT_EMPTY)


def test_single_identified_field_is_chosen():
    (r,) = corpus_analysis("expr").unions
    assert r.tag_field == "kind"


def test_most_distinct_tags_wins():
    (r,) = corpus_analysis("two_candidates").unions
    counts = {o.field: len(o.association.distinct()) for o in r.outcomes if o.identified}
    assert counts == {"kind": 3, "mode": 1}
    assert r.tag_field == "kind"


def test_tie_goes_to_earlier_field():
    (r,) = corpus_analysis("tie").unions
    assert [o.identified for o in r.outcomes] == [True, True]
    assert r.tag_field == "a"


def test_report_entry_shape():
    (r,) = corpus_analysis("expr").unions
    assert r.to_json() == {
        "struct": "Expr", "union": "v", "tag_field": "kind",
        "field_tags": {"b": [2, 3], "e": [1]}, "rem_tags": [0],
        "fields": {"kind": {"status": "identified", "distinct_tags": 4}},
    }


# -- corpus-wide invariants --


@pytest.mark.parametrize("name,result", list(_union_results()),
                         ids=lambda v: v if isinstance(v, str) else "")
def test_field_tags_are_disjoint(name, result):
    for o in result.outcomes:
        if o.identified:
            seen = set()
            for tags in o.association.field_tags.values():
                assert not (seen & tags)
                seen |= tags


@pytest.mark.parametrize("name,result", list(_union_results()),
                         ids=lambda v: v if isinstance(v, str) else "")
def test_access_tags_stay_with_their_access_field(name, result):
    a = corpus_analysis(name)
    ctx = _Context(a.cfg, a.analyses)
    for o in result.outcomes:
        if not o.identified:
            continue
        from_access, _ = collect_from_accesses(ctx, result.struct, result.union_field, o.field)
        for f_u, tags in from_access.items():
            for t in tags:
                owners = [f for f, ts in o.association.field_tags.items() if t in ts]
                assert owners == [f_u]


@pytest.mark.parametrize("name", corpus_programs())
def test_matches_annotation(name):
    expected = annotations()[name]["unions"]
    got = {(r.struct, r.union_field): r for r in corpus_analysis(name).unions}
    assert {(e["struct"], e["union"]) for e in expected} == set(got)
    for e in expected:
        r = got[(e["struct"], e["union"])]
        if e["expected"] == "identified":
            assert r.tag_field == e["tag_field"]
            assert r.to_json()["field_tags"] == {k: sorted(v) for k, v in sorted(e["field_tags"].items())}
            assert r.to_json()["rem_tags"] == e["rem_tags"]
        else:
            assert r.tag_field is None


@pytest.mark.parametrize("name", ["current_block", "caller_tag"])
def test_expected_false_negatives(name):
    (entry,) = annotations()[name]["unions"]
    assert entry["expected"] == "false_negative" and entry["tag_field"] is not None
    (r,) = corpus_analysis(name).unions
    assert r.tag_field is None

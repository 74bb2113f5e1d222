import pytest
from hypothesis import given, settings, strategies as st

from untag import ast as A
from untag.candidates import collect_candidates, tag_eligible_fields
from untag.ir import lower
from untag.parser import parse
from untag.typecheck import Checker

from conftest import corpus_programs, corpus_source


def _cfg(source: str):
    return lower(parse(source))


def _struct(cfg, name: str) -> A.TypeDef:
    return cfg.ast.typedef(name)


def test_expr_candidates():
    c = collect_candidates(_cfg(corpus_source("expr")))
    assert c.structs == {"Expr"}
    assert c.unions == {("Expr", "v")}
    assert c.eligible_fields == {"Expr": ["kind"]}
    assert "eval" in c.functions
    assert not c.is_empty()


def test_compound_assignment_disqualifies():
    cfg = _cfg(corpus_source("no_eligible"))
    assert tag_eligible_fields(_struct(cfg, "Counter"), cfg) == []
    assert collect_candidates(cfg).is_empty()


def test_address_taken_disqualifies():
    cfg = _cfg(corpus_source("addr_taken"))
    assert tag_eligible_fields(_struct(cfg, "Item"), cfg) == []
    assert collect_candidates(cfg).is_empty()


def test_named_union_is_not_a_candidate():
    c = collect_candidates(_cfg(corpus_source("named_union")))
    assert c.is_empty()
    assert c.functions == set()


def test_eligible_fields_keep_declaration_order():
    cfg = _cfg(corpus_source("two_candidates"))
    assert tag_eligible_fields(_struct(cfg, "Val"), cfg) == ["kind", "mode"]


def test_pointer_fields_are_not_eligible():
    cfg = _cfg("struct S { int* p; int k; union { int a; int b; } u; };")
    assert tag_eligible_fields(_struct(cfg, "S"), cfg) == ["k"]


def test_to_json_is_sorted():
    d = collect_candidates(_cfg(corpus_source("multi_union"))).to_json()
    assert d["structs"] == ["Shape"]
    assert d["unions"] == [["Shape", "a"], ["Shape", "b"]]
    assert d["eligible_fields"] == {"Shape": ["k1", "k2"]}


class _FieldOwners(Checker):
    """Type checker that records, per function, the owner types of field accesses."""

    def __init__(self, program: A.Program):
        super().__init__(program, A.MINIC)
        self.owners: dict[str, set[str]] = {}

    def expr(self, e):
        if isinstance(e, A.FieldAccess):
            td = self.ctx.typedef(self.expr(e.base))
            if td is not None:
                self.owners.setdefault(self.fn.qualname, set()).add(td.name)
        return super().expr(e)


@pytest.mark.parametrize("name", corpus_programs())
def test_functions_are_those_touching_candidate_structs(name):
    cfg = _cfg(corpus_source(name))
    c = collect_candidates(cfg)
    if c.is_empty():
        assert c.functions == set()
        return
    scan = _FieldOwners(cfg.ast)
    scan.check()
    expected = {fn for fn, owners in scan.owners.items() if owners & c.structs}
    assert c.functions == expected


BASE = """
struct T {
  int a;
  int b;
  union { int x; T* y; } u;
};

int f(T* t) {
%s
  return 0;
}
"""

STMTS = ["t->a = 1;", "t->b = 2;", "t->a += 1;", "t->b -= 1;", "t->u.x = 3;",
         "int* p{i} = &t->a;", "int* q{i} = &t->b;"]


def _body(stmts: list[str]) -> str:
    return "\n".join(s.format(i=i) for i, s in enumerate(stmts))


@settings(max_examples=150, deadline=None)
@given(st.lists(st.sampled_from(STMTS), max_size=5), st.sampled_from(STMTS))
def test_exclusion_is_monotone(stmts, extra):
    before = _cfg(BASE % _body(stmts))
    after = _cfg(BASE % _body(stmts + [extra]))
    e0 = set(tag_eligible_fields(_struct(before, "T"), before))
    e1 = set(tag_eligible_fields(_struct(after, "T"), after))
    assert e1 <= e0

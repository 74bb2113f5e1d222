import pytest

from untag import ast as A
from untag.emit import MINITAG_HEADER
from untag.ir import lower
from untag.oracle import ABORT, NORMAL, run
from untag.parser import parse
from untag.pipeline import analyze_source, transform_analysis
from untag.transform import (
    CONSOLIDATE, IDIOMATIC_IF_LET, IDIOMATIC_MATCH, IDIOMATIC_OR_PATTERN, NAIVE_DEREF_MUT,
    NAIVE_GET, NAIVE_READ_TAG, NAIVE_SET_TAG, tag_suffix,
)

from conftest import CORPUS, annotations, corpus_analysis, corpus_programs, corpus_source


def _transformed(name: str, naive_only: bool = False):
    return transform_analysis(corpus_analysis(name), naive_only)


def _strategies_in(result, function: str) -> list[str]:
    return [s.strategy for s in result.sites if s.function == function]


# -- types and helpers --


def test_expr_types():
    prog = _transformed("expr").program
    enum = prog.typedef("Expr_v")
    assert enum.kind == "enum"
    assert [(v.name, str(v.payload) if v.payload else None) for v in enum.variants] == [
        ("Empty0", None), ("e1", "Expr*"), ("b2", "BExpr"), ("b3", "BExpr")]
    assert [f.name for f in prog.typedef("Expr").fields] == ["v"]


def test_no_empty_variants_without_rem_tags():
    enum = _transformed("list_nodes").program.typedef("Cell_u")
    assert [v.name for v in enum.variants] == ["num1", "sub2"]
    assert [f.name for f in _transformed("list_nodes").program.typedef("Cell").fields] == ["next", "u"]


def test_negative_tags_are_spelled_out():
    assert tag_suffix(-3) == "m3" and tag_suffix(4) == "4"


def test_helpers_are_generated_for_struct_and_enum():
    prog = _transformed("expr").program
    names = {(f.owner, f.name) for f in prog.funcs if f.owner}
    assert names == {("Expr", "kind"), ("Expr", "set_kind"),
                     ("Expr_v", "get_e"), ("Expr_v", "deref_e_mut"),
                     ("Expr_v", "get_b"), ("Expr_v", "deref_b_mut")}


PROBES = """
int probe_get(int which) {
  Expr* e = new Expr;
  if (which == 1) {
    e->v = Expr_v::e1(e);
  } else {
    BExpr b;
    e->v = Expr_v::b2(b);
  }
  Expr* p = e->v.get_e();
  if (p == e) {
    print(1);
  }
  return 0;
}

int probe_deref() {
  Expr* e = new Expr;
  print(e->kind());
  Expr** q = e->v.deref_e_mut();
  print(e->kind());
  if (*q == null) {
    print(5);
  }
  return 0;
}

int probe_set_same() {
  Expr* e = new Expr;
  e->v = Expr_v::e1(e);
  e->set_kind(1);
  if (e->v.get_e() == e) {
    print(1);
  }
  return 0;
}

int probe_set_shared_payload() {
  Expr* e = new Expr;
  BExpr b;
  b.l = e;
  e->v = Expr_v::b2(b);
  e->set_kind(3);
  print(e->kind());
  BExpr c = e->v.get_b();
  if (c.l == e) {
    print(1);
  }
  return 0;
}

int probe_set_other() {
  Expr* e = new Expr;
  e->v = Expr_v::e1(e);
  e->set_kind(2);
  BExpr c = e->v.get_b();
  if (c.l == null) {
    print(1);
  }
  e->set_kind(7);
  return 0;
}
"""


@pytest.fixture(scope="module")
def probes():
    text = _transformed("expr").text + PROBES
    return lower(parse(text, A.MINITAG))


def test_get_returns_payload_or_aborts(probes):
    ok = run(probes, "probe_get", [1])
    assert (ok.output, ok.termination) == ((1,), NORMAL)
    bad = run(probes, "probe_get", [2])
    assert (bad.termination, bad.site) == (ABORT, "Expr_v.get_e")


def test_deref_mut_coerces_variant(probes):
    out = run(probes, "probe_deref", [])
    assert (out.output, out.termination) == ((0, 1, 5), NORMAL)


def test_set_kind_reuses_payload(probes):
    assert run(probes, "probe_set_same", []).output == (1,)
    assert run(probes, "probe_set_shared_payload", []).output == (3, 1)


def test_set_kind_installs_default_payload_and_rejects_unknown_tags(probes):
    out = run(probes, "probe_set_other", [])
    assert out.output == (1,)
    assert (out.termination, out.site) == (ABORT, "Expr.set_kind")


# -- site planning --


def test_switch_becomes_match():
    r = _transformed("expr")
    assert _strategies_in(r, "eval") == [IDIOMATIC_MATCH]
    assert "Expr_v::e1(ref x) => {\n      return -eval(*x);" in r.text
    assert "match (e->v) {" in r.text


def test_match_arm_binds_by_reference():
    r = _transformed("expr")
    assert "Expr_v::b2(ref x1) => {\n      return eval(x1->l) + eval(x1->r);" in r.text


def test_default_arm_only_when_variants_are_uncovered():
    eval_text = _transformed("expr").text.split("int eval(")[1].split("\n}\n")[0]
    assert "_ =>" not in eval_text
    src = corpus_source("expr").replace("    case 0:\n      return 1;\n", "")
    r = transform_analysis(analyze_source(src))
    eval_text = r.text.split("int eval(")[1].split("\n}\n")[0]
    assert "_ => {\n      abort();" in eval_text


def test_equality_chains_become_if_let_and_or_patterns():
    r = _transformed("expr_if")
    assert IDIOMATIC_OR_PATTERN in _strategies_in(r, "eval")
    assert "} else if let Expr_v::b2(ref x2) | Expr_v::b3(ref x2) = (e->v) {" in r.text
    assert "if let Expr_v::b2(_) = (e->v) {\n      return l + r;" in r.text
    assert _strategies_in(r, "is_leaf") == [IDIOMATIC_IF_LET]


def test_conjunction_is_naive():
    src = corpus_source("expr_if").replace("if (e->kind == 0) {\n    return 1;",
                                           "if (e->kind == 0 && e->v.n > 0) {\n    return 1;")
    r = transform_analysis(analyze_source(src))
    assert _strategies_in(r, "is_leaf") == [NAIVE_READ_TAG, NAIVE_GET]
    assert "e->kind() == 0 && e->v.get_n() > 0" in r.text


def test_same_block_construction_is_consolidated():
    r = _transformed("expr")
    assert _strategies_in(r, "mk_neg") == [CONSOLIDATE]
    assert "e->v = Expr_v::e1(x);" in r.text


def test_write_then_tag_is_consolidated():
    r = _transformed("set_then_write")
    assert _strategies_in(r, "leaf") == [CONSOLIDATE]
    assert "m->body = Msg_body::code1(c);" in r.text


def test_split_construction_is_naive():
    r = _transformed("set_then_write")
    assert sorted(_strategies_in(r, "wrap")) == sorted([NAIVE_DEREF_MUT, NAIVE_SET_TAG])
    assert "*m->body.deref_inner_mut() = x;" in r.text
    assert "m->set_type(2);" in r.text


def test_naive_only_uses_helpers_everywhere():
    r = _transformed("expr", naive_only=True)
    counts = r.strategy_counts()
    assert counts[IDIOMATIC_MATCH] == counts[IDIOMATIC_IF_LET] == counts[CONSOLIDATE] == 0
    assert "switch (e->kind())" in r.text
    assert "eval(e->v.get_e())" in r.text


def test_expr_strategy_log():
    log = _transformed("expr").log_json()
    assert log["helper_calls"] == 4
    assert {k: v for k, v in log["strategies"].items() if v} == {
        IDIOMATIC_MATCH: 1, CONSOLIDATE: 2, NAIVE_SET_TAG: 2, NAIVE_DEREF_MUT: 2}
    assert all({"function", "line", "strategy"} <= set(s) for s in log["sites"])


def test_expr_golden():
    assert _transformed("expr").text == (CORPUS / "expr.mt").read_text()


# -- corpus-wide properties --


@pytest.mark.parametrize("name", corpus_programs())
def test_output_reparses_and_typechecks(name):
    for naive in (False, True):
        text = _transformed(name, naive).text
        assert text.startswith(MINITAG_HEADER)
        prog = parse(text, A.MINITAG)
        lower(prog)


@pytest.mark.parametrize("name", corpus_programs())
def test_idiomatic_never_adds_calls(name):
    default, naive = _transformed(name), _transformed(name, naive_only=True)
    assert default.helper_calls <= naive.helper_calls
    idiomatic = sum(default.strategy_counts()[s] for s in
                    (IDIOMATIC_MATCH, IDIOMATIC_IF_LET, IDIOMATIC_OR_PATTERN, CONSOLIDATE))
    if idiomatic:
        assert default.helper_calls < naive.helper_calls


@pytest.mark.parametrize("name", [n for n in corpus_programs()
                                  if all(u["expected"] != "identified"
                                         for u in annotations()[n]["unions"])])
def test_untagged_programs_are_unchanged(name):
    assert _transformed(name).text == MINITAG_HEADER + corpus_source(name)
    assert _transformed(name).schemes == []

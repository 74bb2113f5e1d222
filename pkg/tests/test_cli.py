import json
import subprocess
import sys

import pytest

from untag.cli import EXIT_FAIL, EXIT_FRONTEND, EXIT_OK, main
from untag.emit import MINITAG_HEADER

from conftest import CORPUS, corpus_source


def _corpus(name: str) -> str:
    return str(CORPUS / f"{name}.mc")


def _report(capsys, name: str) -> dict:
    assert main(["analyze", _corpus(name)]) == EXIT_OK
    return json.loads(capsys.readouterr().out)


def _without_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def test_analyze_expr(capsys):
    r = _report(capsys, "expr")
    assert r["candidates"]["unions"] == [["Expr", "v"]]
    (u,) = r["unions"]
    assert (u["tag_field"], u["field_tags"], u["rem_tags"]) == ("kind", {"b": [2, 3], "e": [1]}, [0])
    assert r["functions"]["total"] == 7
    assert set(r["timing"]) >= {"frontend", "candidates", "may_pta", "must_pta", "heuristic"}


def test_analyze_without_candidates_skips_later_phases(capsys):
    r = _report(capsys, "named_union")
    assert r["candidates"] == {"eligible_fields": {}, "functions": [], "structs": [], "unions": []}
    assert r["unions"] == [] and r["functions"]["analyzed"] == 0
    assert not {"may_pta", "must_pta", "heuristic"} & set(r["timing"])


def test_analyze_json_output(tmp_path):
    out = tmp_path / "report.json"
    assert main(["analyze", _corpus("tie"), "--json", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["unions"][0]["tag_field"] == "a"


def test_report_is_deterministic(capsys):
    assert _without_timing(_report(capsys, "multi_union")) == _without_timing(_report(capsys, "multi_union"))


def test_syntax_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.mc"
    bad.write_text("int main() {\n  return 1\n}\n")
    for cmd in (["analyze", str(bad)], ["transform", str(bad), "-o", str(tmp_path / "o.mt")],
                ["check", str(bad), "--manifest", str(CORPUS / "expr.json")]):
        assert main(cmd) == EXIT_FRONTEND
        err = capsys.readouterr().err
        assert err.startswith(f"{bad}:3:1: ")


def test_transform_writes_output_and_log(tmp_path):
    out = tmp_path / "expr.mt"
    assert main(["transform", _corpus("expr"), "-o", str(out)]) == EXIT_OK
    assert out.read_text() == (CORPUS / "expr.mt").read_text()
    log = json.loads((tmp_path / "expr.strategies.json").read_text())
    assert log["helper_calls"] == 4
    assert log["report"]["unions"][0]["tag_field"] == "kind"
    assert not (tmp_path / "expr.dot").exists() and not (tmp_path / "expr.may.json").exists()


def test_naive_only_has_more_calls(tmp_path):
    calls = {}
    for flag in ([], ["--naive-only"]):
        out = tmp_path / f"expr{len(flag)}.mt"
        assert main(["transform", _corpus("expr"), "-o", str(out), *flag]) == EXIT_OK
        calls[bool(flag)] = json.loads((tmp_path / f"expr{len(flag)}.strategies.json").read_text())["helper_calls"]
    assert calls[False] < calls[True]


def test_dump_flags(tmp_path):
    out = tmp_path / "expr.mt"
    assert main(["transform", _corpus("expr"), "-o", str(out), "--dump-graphs", "--dump-may"]) == EXIT_OK
    assert (tmp_path / "expr.dot").read_text().startswith("digraph")
    may = json.loads((tmp_path / "expr.may.json").read_text())
    assert may["build::$ret"] == ["new@mk_add:0:0", "new@mk_mul:0:0", "new@mk_neg:0:0", "new@mk_one:0:0"]


def test_max_int_set_flag(capsys):
    assert main(["analyze", _corpus("expr"), "--max-int-set", "1"]) == EXIT_OK
    (u,) = json.loads(capsys.readouterr().out)["unions"]
    assert u["tag_field"] == "kind"
    assert u["field_tags"] == {"b": [2, 3], "e": [1]}


def test_untagged_program_is_copied_with_header(tmp_path):
    out = tmp_path / "n.mt"
    assert main(["transform", _corpus("caller_tag"), "-o", str(out)]) == EXIT_OK
    assert out.read_text() == MINITAG_HEADER + corpus_source("caller_tag")


def test_check_expr_manifest(capsys):
    assert main(["check", _corpus("expr"), "--manifest", str(CORPUS / "expr.json")]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("16/16 cases ok")


def test_check_expected_abort_passes(capsys):
    assert main(["check", _corpus("make_pattern"), "--manifest", str(CORPUS / "make_pattern.json")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "differs" in out and "at Entry_f.get_func_ptr" in out


def test_check_reports_unexpected_mismatch(tmp_path, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps([{"entry": "main", "inputs": [1], "strict": False}]))
    assert main(["check", _corpus("make_pattern"), "--manifest", str(manifest)]) == EXIT_FAIL
    assert "FAIL main(1,)" in capsys.readouterr().out


def test_check_empty_manifest(tmp_path, capsys):
    manifest = tmp_path / "empty.json"
    manifest.write_text("[]")
    assert main(["check", _corpus("expr"), "--manifest", str(manifest)]) == EXIT_OK
    assert "0/0 cases ok" in capsys.readouterr().out


def test_check_missing_manifest(tmp_path, capsys):
    assert main(["check", _corpus("expr"), "--manifest", str(tmp_path / "nope.json")]) == EXIT_FAIL
    assert "manifest not found" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.mc")]) == EXIT_FAIL
    assert "untag:" in capsys.readouterr().err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "untag.cli", "analyze", _corpus("tie")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["unions"][0]["tag_field"] == "a"


def test_subcommand_required(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2

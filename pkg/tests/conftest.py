import json
import sys
from functools import lru_cache
from pathlib import Path

import pytest

from untag.pipeline import analyze_source

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def corpus_programs() -> list[str]:
    return sorted(p.stem for p in CORPUS.glob("*.mc"))


def corpus_source(name: str) -> str:
    return (CORPUS / f"{name}.mc").read_text()


def manifest_path(name: str) -> Path:
    return CORPUS / f"{name}.json"


@lru_cache(maxsize=None)
def corpus_analysis(name: str):
    return analyze_source(corpus_source(name))


@lru_cache(maxsize=None)
def annotations() -> dict:
    return json.loads((CORPUS / "annotations.json").read_text())


@pytest.fixture
def expr_analysis():
    return corpus_analysis("expr")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)

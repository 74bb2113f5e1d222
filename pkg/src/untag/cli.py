"""Command-line driver: ``untag analyze | transform | check``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ast as A
from .ir import lower
from .must_pta import DEFAULT_MAX_INT_SET, dump_dot
from .oracle import Case, diff_test
from .parser import FrontendError, parse
from .pipeline import analyze_source, build_report, transform_analysis

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_FRONTEND = 2


def _read(path: str) -> str:
    return Path(path).read_text()


def _write_json(path: str, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _report_frontend(err: FrontendError, path: str) -> int:
    for d in err.diagnostics:
        print(f"{path}:{d}", file=sys.stderr)
    return EXIT_FRONTEND


def cmd_analyze(args) -> int:
    try:
        analysis = analyze_source(_read(args.file), args.max_int_set)
    except FrontendError as err:
        return _report_frontend(err, args.file)
    transformed = transform_analysis(analysis)
    report = build_report(analysis, transformed)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.json:
        Path(args.json).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def cmd_transform(args) -> int:
    try:
        analysis = analyze_source(_read(args.file), args.max_int_set)
    except FrontendError as err:
        return _report_frontend(err, args.file)
    result = transform_analysis(analysis, naive_only=args.naive_only)
    out = Path(args.output)
    out.write_text(result.text)
    log = result.log_json()
    log["report"] = build_report(analysis, result)
    _write_json(str(_sibling(out, ".strategies.json")), log)
    if args.dump_graphs:
        _sibling(out, ".dot").write_text("".join(dump_dot(a) for _, a in sorted(analysis.analyses.items())))
    if args.dump_may:
        _write_json(str(_sibling(out, ".may.json")), analysis.may.to_json() if analysis.may else {})
    return EXIT_OK


def cmd_check(args) -> int:
    manifest = Path(args.manifest)
    if not manifest.exists():
        print(f"manifest not found: {manifest}", file=sys.stderr)
        return EXIT_FAIL
    cases = [Case.from_json(d) for d in json.loads(manifest.read_text())]
    try:
        analysis = analyze_source(_read(args.file), args.max_int_set)
    except FrontendError as err:
        return _report_frontend(err, args.file)
    result = transform_analysis(analysis)
    transformed = lower(parse(result.text, A.MINITAG))
    verdicts = diff_test(analysis.cfg, transformed, cases)
    for v in verdicts:
        status = "ok" if v.ok else "FAIL"
        kind = "equal" if v.equal else "differs"
        print(f"{status} {v.case.entry}{tuple(v.case.inputs)}: {kind}; "
              f"original {v.original.termination} {list(v.original.output)}, "
              f"transformed {v.transformed.termination} {list(v.transformed.output)}"
              + (f" at {v.transformed.site}" if v.transformed.site else ""))
    print(f"{sum(v.ok for v in verdicts)}/{len(verdicts)} cases ok")
    return EXIT_OK if all(v.ok for v in verdicts) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="untag", description="Infer union tags and rewrite unions as tagged unions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="print the analysis report")
    p.add_argument("file")
    p.add_argument("--json", metavar="OUT", help="write the report to OUT instead of stdout")
    p.add_argument("--max-int-set", type=int, default=DEFAULT_MAX_INT_SET)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("transform", help="write the MiniTag translation")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--naive-only", action="store_true", help="use helper methods at every site")
    p.add_argument("--max-int-set", type=int, default=DEFAULT_MAX_INT_SET)
    p.add_argument("--dump-graphs", action="store_true", help="write must-graphs as DOT next to the output")
    p.add_argument("--dump-may", action="store_true", help="write the may-points-to relation as JSON")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("check", help="compare original and transformed runs")
    p.add_argument("file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--max-int-set", type=int, default=DEFAULT_MAX_INT_SET)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as err:
        print(f"untag: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

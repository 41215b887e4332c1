"""linetracer command line: record frame events, run assertion checks."""

from __future__ import annotations

import argparse
import ast
import json
import sys

from .checker import DEFAULT_TIMEOUT, exec_check
from .recorder import (
    DEFAULT_MAX_EVENTS,
    TraceRecordingConfig,
    events_jsonl,
    trace_program,
)


def _parse_entry(spec: str) -> tuple[str, str | None]:
    # "path.py:func" runs one function; a bare path runs the module.
    if ":" in spec and not spec.endswith(".py"):
        path, func = spec.rsplit(":", 1)
        return path, func
    return spec, None


def cmd_trace(args) -> int:
    path, func = _parse_entry(args.entry)
    literals = tuple(ast.literal_eval(a) for a in (args.arg or []))
    config = TraceRecordingConfig(
        path=path, func=func, args=literals, max_events=args.max_events
    )
    result = trace_program(config)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(events_jsonl(result))
    if args.ctx:
        with open(args.ctx, "w", encoding="utf-8") as fh:
            fh.write(result.code_context)
    print(json.dumps({"events": len(result.events), "exit": result.exit}))
    return 0


def cmd_check(args) -> int:
    with open(args.fn_src, "r", encoding="utf-8") as fh:
        source = fh.read()
    result = exec_check(source, args.input or [], args.expect, timeout=args.timeout)
    print(json.dumps({"ok": result.ok, "reason": result.reason}))
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linetracer",
        description="Record line-level frame events and run input/output checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="record a program run as frame-event JSONL")
    p.add_argument("--entry", required=True,
                   help="module path, or path.py:function for a single function")
    p.add_argument("--arg", action="append",
                   help="literal repr of one entry argument (repeatable)")
    p.add_argument("--max-events", type=int, default=DEFAULT_MAX_EVENTS)
    p.add_argument("--out", required=True, help="events JSONL output")
    p.add_argument("--ctx", help="code-context sidecar output")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("check", help="assert f(candidate_input) == reference_output")
    p.add_argument("--fn-src", required=True, help="file holding the function source")
    p.add_argument("--input", action="append",
                   help="repr of one argument (repeatable)")
    p.add_argument("--expect", required=True, help="repr of the reference output")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, LookupError, ValueError, SyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

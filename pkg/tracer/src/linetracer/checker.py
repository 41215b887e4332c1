"""Sandboxed input/output assertion checks.

Each check runs the candidate function in a fresh subprocess under a
wall-clock timeout and asserts that calling it on the candidate input
yields the reference output. Timeouts and evaluation errors are reported
as failures with a diagnostic reason, never as exceptions.
"""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass
from typing import Sequence

DEFAULT_TIMEOUT = 5.0

_RUNNER = r"""
import ast, json, sys, types

payload = json.load(sys.stdin)
ns = {}


def _load(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return eval(text, ns)  # reconstructible non-literal reprs


try:
    exec(payload["src"], ns)
    funcs = [v for v in ns.values() if isinstance(v, types.FunctionType)]
    if len(funcs) == 1:
        fn = funcs[0]
    elif isinstance(ns.get("f"), types.FunctionType):
        fn = ns["f"]
    else:
        raise ValueError(f"expected a single function, found {len(funcs)}")
    args = [_load(a) for a in payload["args"]]
    result = fn(*args)
    try:
        ok = result == _load(payload["expect"])
    except Exception:
        ok = repr(result) == payload["expect"]
    print(json.dumps({"ok": bool(ok), "reason": "ok" if ok else "mismatch"}))
except BaseException as exc:
    print(json.dumps({"ok": False, "reason": f"error: {exc!r}"}))
"""


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    reason: str  # "ok" | "mismatch" | "timeout" | "error: ..."


def exec_check(
    function_source: str,
    candidate_input: Sequence[str],
    reference_output: str,
    timeout: float = DEFAULT_TIMEOUT,
) -> CheckResult:
    """True iff the function applied to the candidate input (a list of value
    reprs) equals the reference output repr."""

    payload = json.dumps(
        {
            "src": function_source,
            "args": list(candidate_input),
            "expect": reference_output,
        }
    )
    try:
        proc = subprocess.run(
            [sys.executable, "-c", _RUNNER],
            input=payload,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired:
        return CheckResult(ok=False, reason="timeout")
    try:
        data = json.loads(proc.stdout.strip().splitlines()[-1])
        return CheckResult(ok=bool(data["ok"]), reason=str(data["reason"]))
    except (json.JSONDecodeError, IndexError, KeyError):
        detail = proc.stderr.strip().splitlines()[-1:] or ["no output"]
        return CheckResult(ok=False, reason=f"error: {detail[0]}")

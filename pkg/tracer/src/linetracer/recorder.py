"""Frame-event recording through the interpreter trace hook.

Records one event per hook invocation for frames belonging to the traced
file: call (with the argument snapshot), line (locals before the line
runs), return (with the value repr) and exception (with the exception
repr). Events are emitted in the frame-event JSONL wire format; the
code-context sidecar is the full module source so downstream consumers can
slice per-block sources by the line span carried in each block id
(``<file>:<name>:<start>-<end>``).
"""

from __future__ import annotations

import importlib.util
import linecache
import os
import re
import runpy
import sys
from dataclasses import dataclass
from typing import Any, Optional

DEFAULT_MAX_EVENTS = 50_000

_ADDR_RE = re.compile(r" at 0x[0-9a-fA-F]+")


class _Abort(BaseException):
    """Raised inside the trace hook to stop a budget-exhausted run; derives
    from BaseException so ordinary except clauses cannot swallow it."""


@dataclass
class TraceRecordingConfig:
    """What to trace: a module file, optionally a function in it with
    literal arguments, under an event budget."""

    path: str
    func: Optional[str] = None
    args: tuple = ()
    max_events: int = DEFAULT_MAX_EVENTS
    capture_source: bool = True

    def __post_init__(self) -> None:
        if self.max_events < 1:
            raise ValueError("max_events must be at least 1")


@dataclass
class TraceResult:
    events: list[dict]
    exit: str  # "normal" | "error" | "never"
    code_context: str


def safe_repr(value: Any) -> str:
    """repr with memory addresses scrubbed so re-tracing a deterministic
    program is byte-identical across runs; a raising __repr__ becomes a
    placeholder."""

    try:
        return _ADDR_RE.sub("", repr(value))
    except BaseException:
        return "<unrepresentable>"


def _block_id(code, path: str) -> str:
    last = code.co_firstlineno
    for _, _, line in code.co_lines():
        if line is not None and line > last:
            last = line
    return f"{os.path.basename(path)}:{code.co_name}:{code.co_firstlineno}-{last}"


class _Recorder:
    def __init__(self, path: str, max_events: int) -> None:
        self.path = os.path.abspath(path)
        self.max_events = max_events
        self.events: list[dict] = []
        self.open_frames = 0
        self.aborted = False
        self._block_cache: dict[int, str] = {}

    def _snapshot(self, frame) -> dict[str, str]:
        return {
            name: safe_repr(value)
            for name, value in frame.f_locals.items()
            if not name.startswith("__")
        }

    def _record(self, frame, evt: str, arg_repr: Optional[str], depth: int) -> None:
        if len(self.events) >= self.max_events:
            self.aborted = True
            raise _Abort()
        code = frame.f_code
        block = self._block_cache.get(id(code))
        if block is None:
            block = self._block_cache[id(code)] = _block_id(code, self.path)
        self.events.append(
            {
                "seq": len(self.events),
                "evt": evt,
                "src": linecache.getline(self.path, frame.f_lineno).rstrip("\n"),
                "line_no": frame.f_lineno,
                "func": code.co_name,
                "block": block,
                "locals": self._snapshot(frame),
                "arg": arg_repr,
                "depth": depth,
            }
        )

    def tracefunc(self, frame, event, arg):
        if self.aborted:
            return None
        if os.path.abspath(frame.f_code.co_filename) != self.path:
            return None
        if event == "call":
            self._record(frame, "call", None, self.open_frames)
            self.open_frames += 1
        elif event == "line":
            self._record(frame, "line", None, self.open_frames - 1)
        elif event == "return":
            self._record(frame, "return", safe_repr(arg), self.open_frames - 1)
            self.open_frames -= 1
        elif event == "exception":
            self._record(frame, "exception", safe_repr(arg[1]), self.open_frames - 1)
        return self.tracefunc


def trace_program(config: TraceRecordingConfig) -> TraceResult:
    """Run the configured entry point under the trace hook.

    Exit is ``normal`` on a clean return, ``error`` on an uncaught
    exception, ``never`` when the event budget was exhausted.
    """

    path = os.path.abspath(config.path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"entry module not found: {path}")
    linecache.checkcache(path)
    recorder = _Recorder(path, config.max_events)
    target = None
    if config.func is not None:
        spec = importlib.util.spec_from_file_location("_linetracer_target", path)
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        try:
            target = getattr(module, config.func)
        except AttributeError as exc:
            raise LookupError(f"no function {config.func!r} in {path}") from exc

    previous = sys.gettrace()
    exit_code = "normal"
    sys.settrace(recorder.tracefunc)
    try:
        if target is not None:
            target(*config.args)
        else:
            runpy.run_path(path, run_name="__main__")
    except _Abort:
        exit_code = "never"
    except BaseException:
        exit_code = "error"
    finally:
        sys.settrace(previous)
    if recorder.aborted:
        exit_code = "never"
    context = ""
    if config.capture_source:
        with open(path, "r", encoding="utf-8") as fh:
            context = fh.read()
    return TraceResult(events=recorder.events, exit=exit_code, code_context=context)


def events_jsonl(result: TraceResult) -> str:
    """Render the wire format: one event object per line plus the exit line."""

    import json

    lines = [json.dumps(e, ensure_ascii=False) for e in result.events]
    lines.append(json.dumps({"exit": result.exit}))
    return "\n".join(lines) + "\n"

"""File formats: frame-event JSONL, code-context sidecars, tree dumps,
trajectory records and encoded corpora.

The frame-event wire format is one JSON object per line with fields
``seq, evt, src, line_no, func, block, locals, arg, depth`` and a final
``{"exit": ...}`` line. The sidecar carries the full module source; block
ids of the form ``<file>:<name>:<start>-<end>`` let per-trajectory contexts
be sliced out of it without parsing the traced language.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional

from .model import (
    ActionTag,
    DebuggerAction,
    EmittedState,
    EventKind,
    ExitCode,
    FrameEvent,
    LocalsView,
    MalformedTraceError,
    Step,
    Trajectory,
)
from .tree import StateNode, StateTree, build_forward_tree

_BLOCK_SPAN_RE = re.compile(r":(\d+)-(\d+)$")


@dataclass
class TraceRun:
    """One recorded execution: its events, outcome, and module source."""

    events: list[FrameEvent]
    exit_code: ExitCode
    module_text: str = ""


def parse_events_jsonl(text: str) -> tuple[list[FrameEvent], ExitCode]:
    events: list[FrameEvent] = []
    exit_code: Optional[ExitCode] = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if exit_code is not None:
            raise MalformedTraceError(f"line {lineno}: records after the exit line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedTraceError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        if "exit" in obj:
            exit_code = ExitCode(obj["exit"])
            continue
        try:
            events.append(
                FrameEvent(
                    seq_index=int(obj["seq"]),
                    kind=EventKind(obj["evt"]),
                    src=obj["src"],
                    line_no=int(obj["line_no"]),
                    func_name=obj["func"],
                    code_block_id=obj["block"],
                    locals=dict(obj["locals"]),
                    arg=obj["arg"],
                    depth=int(obj["depth"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise MalformedTraceError(f"line {lineno}: {exc}") from exc
    if exit_code is None:
        raise MalformedTraceError("missing final exit line")
    return events, exit_code


def load_trace_run(events_path: str, context_path: Optional[str] = None) -> TraceRun:
    with open(events_path, "r", encoding="utf-8") as fh:
        events, exit_code = parse_events_jsonl(fh.read())
    module_text = ""
    if context_path is not None:
        with open(context_path, "r", encoding="utf-8") as fh:
            module_text = fh.read()
    return TraceRun(events=events, exit_code=exit_code, module_text=module_text)


def event_to_record(ev: FrameEvent) -> dict:
    return {
        "seq": ev.seq_index,
        "evt": ev.kind.value,
        "src": ev.src,
        "line_no": ev.line_no,
        "func": ev.func_name,
        "block": ev.code_block_id,
        "locals": dict(ev.locals),
        "arg": ev.arg,
        "depth": ev.depth,
    }


def write_events_jsonl(path: str, events: Iterable[FrameEvent], exit_code: ExitCode) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(event_to_record(ev), ensure_ascii=False) + "\n")
        fh.write(json.dumps({"exit": exit_code.value}) + "\n")


def block_line_span(block_id: str) -> Optional[tuple[int, int]]:
    m = _BLOCK_SPAN_RE.search(block_id)
    if not m:
        return None
    start, end = int(m.group(1)), int(m.group(2))
    if start < 1 or end < start:
        return None
    return start, end


def derive_context(events: list[FrameEvent], module_text: str) -> str:
    """Source text of every code block visited by ``events``.

    Blocks are sliced out of the module text by the line span carried in
    their block id (visited min/max line numbers as a fallback), ordered by
    start line, separated by one blank line, with a single trailing newline.
    """

    if not events:
        return ""
    if not module_text:
        return ""
    spans: dict[str, tuple[int, int]] = {}
    for ev in events:
        span = block_line_span(ev.code_block_id)
        if span is None:
            lo, hi = spans.get(ev.code_block_id, (ev.line_no, ev.line_no))
            span = (min(lo, ev.line_no), max(hi, ev.line_no))
        spans[ev.code_block_id] = span
    # Nested blocks (inner functions) sit inside their enclosing block's
    # span; merge overlaps so no source line is emitted twice.
    merged: list[list[int]] = []
    for start, end in sorted(set(spans.values())):
        if merged and start <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    lines = module_text.splitlines()
    chunks = ["\n".join(lines[start - 1 : end]) for start, end in merged]
    return "\n\n".join(chunks) + "\n"


def tree_from_run(run: TraceRun) -> StateTree:
    return build_forward_tree(
        run.events,
        exit_code=run.exit_code,
        code_context=derive_context(run.events, run.module_text),
    )


# -- tree dumps --------------------------------------------------------------


def _node_to_record(node: StateNode) -> dict:
    rec = event_to_record(node.event)
    rec["frame"] = node.frame_id
    if node.is_dup:
        rec["dup"] = True
    rec["children"] = [_node_to_record(c) for c in node.children]
    return rec


def tree_to_json(tree: StateTree) -> dict:
    return {
        "direction": tree.direction,
        "exit": tree.exit_code.value,
        "code_context": tree.code_context,
        "call_dup_count": tree.call_dup_count,
        "roots": [_node_to_record(r) for r in tree.roots],
    }


def _node_from_record(rec: dict, parent: Optional[StateNode]) -> StateNode:
    ev = FrameEvent(
        seq_index=int(rec["seq"]),
        kind=EventKind(rec["evt"]),
        src=rec["src"],
        line_no=int(rec["line_no"]),
        func_name=rec["func"],
        code_block_id=rec["block"],
        locals=dict(rec["locals"]),
        arg=rec["arg"],
        depth=int(rec["depth"]),
    )
    node = StateNode(
        event=ev, parent=parent, frame_id=int(rec["frame"]), is_dup=bool(rec.get("dup"))
    )
    node.children = [_node_from_record(c, node) for c in rec["children"]]
    return node


def tree_from_json(data: dict) -> StateTree:
    from .tree import _finalize  # shared finalizer keeps dumps round-trippable

    roots = [_node_from_record(r, None) for r in data["roots"]]
    order: list[StateNode] = []

    def collect(nodes: list[StateNode]) -> None:
        for n in nodes:
            order.append(n)
            collect(n.children)

    collect(roots)
    tree = StateTree(
        direction=data["direction"],
        roots=roots,
        order=order,
        exit_code=ExitCode(data["exit"]),
        code_context=data["code_context"],
        call_dup_count=int(data.get("call_dup_count", 0)),
    )
    _finalize(tree)
    return tree


# -- trajectory records -------------------------------------------------------


def state_to_record(state: EmittedState) -> dict:
    rec: dict = {"evt": state.kind.value, "src": state.src}
    if state.view is not None:
        rec["locals"] = dict(state.view.entries)
        rec["elided"] = state.view.elided
        rec["full"] = state.view.full
    if state.arg is not None:
        rec["arg"] = state.arg
    return rec


def state_from_record(rec: dict) -> EmittedState:
    view = None
    if "locals" in rec:
        view = LocalsView(
            entries=tuple(rec["locals"].items()),
            elided=bool(rec.get("elided", False)),
            full=bool(rec.get("full", False)),
        )
    return EmittedState(
        kind=EventKind(rec["evt"]),
        src=rec["src"],
        view=view,
        arg=rec.get("arg"),
    )


def trajectory_to_record(trajectory: Trajectory, **extra) -> dict:
    rec = {
        "direction": trajectory.direction,
        "code_context": trajectory.code_context,
        "steps": [
            {
                "state": state_to_record(step.state),
                "action": None
                if step.action is None
                else {
                    "tag": step.action.tag.value,
                    "src_target": step.action.src_target,
                },
            }
            for step in trajectory.steps
        ],
        "exit": None if trajectory.exit is None else trajectory.exit.value,
    }
    rec.update(extra)
    return rec


def trajectory_from_record(rec: dict) -> Trajectory:
    steps = []
    for item in rec["steps"]:
        action = None
        if item.get("action") is not None:
            action = DebuggerAction(
                tag=ActionTag(item["action"]["tag"]),
                src_target=item["action"].get("src_target"),
            )
        steps.append(Step(state=state_from_record(item["state"]), action=action))
    exit_code = rec.get("exit")
    return Trajectory(
        direction=rec["direction"],
        code_context=rec["code_context"],
        steps=tuple(steps),
        exit=None if exit_code is None else ExitCode(exit_code),
    )


def read_jsonl(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl(path: str, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def fixture_path(name: str) -> str:
    """Path of a bundled fixture file (the count example, etc.)."""

    return str(resources.files("dbgtrace").joinpath("fixtures", name))

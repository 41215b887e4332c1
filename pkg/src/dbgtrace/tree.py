"""Call-stack state trees: forward reconstruction, inversion, entry truncation.

A state tree holds one node per frame event. The states of a function
invocation hang off the line node that performed the call, so node depth
equals call-stack depth and the in-order traversal (node, then children)
reproduces the recorded event order exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    EventKind,
    ExitCode,
    FORWARD_TO_INVERSE,
    FrameEvent,
    MalformedTraceError,
)


@dataclass(eq=False)
class StateNode:
    """One tree node. Identity equality; nodes are never shared across trees.

    ``is_dup`` marks synthesized inv_line_call duplicates. ``subtree_span``
    covers the in-order positions of this node's subtree (for forward trees
    these coincide with seq indexes).
    """

    event: FrameEvent
    children: list["StateNode"] = field(default_factory=list)
    parent: Optional["StateNode"] = None
    frame_id: int = 0
    is_dup: bool = False
    order_index: int = -1
    level: list["StateNode"] = field(default_factory=list, repr=False)
    level_pos: int = -1
    subtree_span: tuple[int, int] = (-1, -1)

    @property
    def kind(self) -> EventKind:
        return self.event.kind


@dataclass
class StateTree:
    """A forward or inverse state tree plus the trace-level metadata a
    trajectory needs (recorded exit code, code context)."""

    direction: str  # "forward" | "inverse"
    roots: list[StateNode]
    order: list[StateNode]
    exit_code: ExitCode
    code_context: str
    call_dup_count: int = 0

    @property
    def total_nodes(self) -> int:
        return len(self.order)


def validate_events(events: list[FrameEvent]) -> None:
    """Check the depth/balance laws a recorded stream must satisfy.

    Simulates the open-frame count: a call opens a frame and must sit at the
    new frame's depth, every other event fires in the current top frame, and
    a return closes it. Raises MalformedTraceError with the offending index.
    """

    if not events:
        raise MalformedTraceError("empty event stream")
    open_frames = 0
    for i, ev in enumerate(events):
        if ev.seq_index != i:
            raise MalformedTraceError(
                f"seq_index {ev.seq_index} is not contiguous", i
            )
        if ev.kind is EventKind.CALL:
            open_frames += 1
        elif open_frames == 0:
            raise MalformedTraceError(
                f"{ev.kind.value} event outside any open frame", i
            )
        if not ev.kind.is_forward:
            raise MalformedTraceError(
                f"inverse kind {ev.kind.value} in a recorded stream", i
            )
        if ev.depth != open_frames - 1:
            raise MalformedTraceError(
                f"depth {ev.depth} does not match open-frame depth {open_frames - 1}",
                i,
            )
        if ev.kind is EventKind.RETURN:
            if ev.arg is None:
                raise MalformedTraceError("return event without arg", i)
            open_frames -= 1
        elif ev.kind is EventKind.EXCEPTION and ev.arg is None:
            raise MalformedTraceError("exception event without arg", i)
        elif ev.kind is EventKind.LINE and ev.arg is not None:
            raise MalformedTraceError("line event with arg", i)
    # Frames left open at stream end are allowed: budget-truncated traces.


def build_forward_tree(
    events: list[FrameEvent],
    exit_code: ExitCode = ExitCode.NORMAL,
    code_context: str = "",
) -> StateTree:
    """Reconstruct the forward state tree from a validated event stream.

    Each event attaches under the most recent node one depth level up (its
    calling line); depth-0 events become roots. Unmatched calls at stream end
    simply leave their subtree open-ended.
    """

    validate_events(events)
    roots: list[StateNode] = []
    last_at_depth: dict[int, StateNode] = {}
    frame_stack: list[int] = []
    next_frame = 0
    order: list[StateNode] = []
    for ev in events:
        if ev.kind is EventKind.CALL:
            next_frame += 1
            frame_stack.append(next_frame)
        node = StateNode(event=ev, frame_id=frame_stack[-1])
        if ev.depth == 0:
            roots.append(node)
        else:
            parent = last_at_depth.get(ev.depth - 1)
            if parent is None:
                raise MalformedTraceError(
                    "no enclosing node one level up", ev.seq_index
                )
            node.parent = parent
            parent.children.append(node)
        last_at_depth[ev.depth] = node
        order.append(node)
        if ev.kind is EventKind.RETURN:
            frame_stack.pop()
    tree = StateTree(
        direction="forward",
        roots=roots,
        order=order,
        exit_code=exit_code,
        code_context=code_context,
    )
    _finalize(tree)
    return tree


def build_inverse_tree(fwd: StateTree) -> StateTree:
    """Derive the inverse state tree from a forward tree.

    State order is reversed. Every calling line node is duplicated: the
    inv_line_call copy precedes the callee's reversed states and carries them
    as children (the choice point for stepping into or over the call
    backwards), the plain inv_line copy follows them. Node count grows by
    exactly the number of calling lines.
    """

    if fwd.direction != "forward":
        raise ValueError("build_inverse_tree expects a forward tree")
    dup_count = 0

    def invert_block(nodes: list[StateNode], parent: Optional[StateNode]) -> list[StateNode]:
        nonlocal dup_count
        out: list[StateNode] = []
        for node in reversed(nodes):
            inv_event = dataclasses.replace(
                node.event, kind=FORWARD_TO_INVERSE[node.event.kind]
            )
            if node.children:
                dup_count += 1
                dup_event = dataclasses.replace(
                    node.event, kind=EventKind.INV_LINE_CALL
                )
                dup = StateNode(
                    event=dup_event, parent=parent, frame_id=node.frame_id, is_dup=True
                )
                dup.children = invert_block(node.children, dup)
                out.append(dup)
            out.append(
                StateNode(event=inv_event, parent=parent, frame_id=node.frame_id)
            )
        return out

    roots = invert_block(fwd.roots, None)
    order: list[StateNode] = []

    def collect(nodes: list[StateNode]) -> None:
        for n in nodes:
            order.append(n)
            collect(n.children)

    collect(roots)
    tree = StateTree(
        direction="inverse",
        roots=roots,
        order=order,
        exit_code=fwd.exit_code,
        code_context=fwd.code_context,
        call_dup_count=dup_count,
    )
    _finalize(tree)
    return tree


def _finalize(tree: StateTree) -> None:
    """Assign in-order indexes, sibling-level references and subtree spans."""

    for idx, node in enumerate(tree.order):
        node.order_index = idx

    def visit(nodes: list[StateNode]) -> None:
        for pos, node in enumerate(nodes):
            node.level = nodes
            node.level_pos = pos
            if node.children:
                visit(node.children)
                last = node.children[-1].subtree_span[1]
            else:
                last = node.order_index
            node.subtree_span = (node.order_index, last)

    visit(tree.roots)


@dataclass
class EntrySelection:
    """Result of entry-point truncation. ``warning`` is set when the stream
    contained no call event and was returned unchanged."""

    events: list[FrameEvent]
    call_seq: Optional[int]
    warning: bool = False


def select_entry_point(events: list[FrameEvent], rng) -> EntrySelection:
    """Truncate a trace to the span of one uniformly chosen function call.

    Returns the contiguous sub-stream from that call through its matching
    return (or the stream end if the call never returned), with seq indexes
    and depths re-based to 0.
    """

    calls = [ev.seq_index for ev in events if ev.kind is EventKind.CALL]
    if not calls:
        return EntrySelection(events=list(events), call_seq=None, warning=True)
    return select_entry_point_at(events, calls[rng.randrange(len(calls))])


def select_entry_point_at(events: list[FrameEvent], call_seq: int) -> EntrySelection:
    """Deterministic variant of select_entry_point for a known call event."""

    start = None
    for i, ev in enumerate(events):
        if ev.seq_index == call_seq:
            start = i
            break
    if start is None or events[start].kind is not EventKind.CALL:
        raise ValueError(f"seq {call_seq} is not a call event")
    open_frames = 0
    end = len(events)
    for j in range(start, len(events)):
        kind = events[j].kind
        if kind is EventKind.CALL:
            open_frames += 1
        elif kind is EventKind.RETURN:
            open_frames -= 1
            if open_frames == 0:
                end = j + 1
                break
    base_depth = events[start].depth
    rebased = [
        dataclasses.replace(ev, seq_index=i, depth=ev.depth - base_depth)
        for i, ev in enumerate(events[start:end])
    ]
    return EntrySelection(events=rebased, call_seq=call_seq, warning=False)

"""Shared domain types: frame events, debugger actions, locals views, trajectories.

Variable values are opaque repr text produced by whatever recorded the trace.
Nothing in this package interprets that text; it is only compared, diffed and
reordered, which keeps the pipeline independent of the traced language.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class EventKind(Enum):
    """Recorded trace-hook event kinds, plus the synthetic inverse kinds.

    ``INV_LINE_CALL`` never appears in a recorded stream; it is synthesized
    when a forward tree is inverted (one duplicate per calling line node).
    """

    CALL = "call"
    LINE = "line"
    RETURN = "return"
    EXCEPTION = "exception"
    INV_CALL = "inv_call"
    INV_LINE = "inv_line"
    INV_LINE_CALL = "inv_line_call"
    INV_RETURN = "inv_return"
    INV_EXCEPTION = "inv_exception"

    @property
    def is_forward(self) -> bool:
        return self in _FORWARD_KINDS

    @property
    def is_inverse(self) -> bool:
        return not self.is_forward


_FORWARD_KINDS = frozenset(
    {EventKind.CALL, EventKind.LINE, EventKind.RETURN, EventKind.EXCEPTION}
)

FORWARD_TO_INVERSE = {
    EventKind.CALL: EventKind.INV_CALL,
    EventKind.LINE: EventKind.INV_LINE,
    EventKind.RETURN: EventKind.INV_RETURN,
    EventKind.EXCEPTION: EventKind.INV_EXCEPTION,
}

# The synthesized duplicate maps back to a plain line event.
INVERSE_TO_FORWARD = {v: k for k, v in FORWARD_TO_INVERSE.items()}
INVERSE_TO_FORWARD[EventKind.INV_LINE_CALL] = EventKind.LINE


class ActionTag(Enum):
    STEP_INTO = "step_into"
    STEP_OVER = "step_over"
    STEP_RETURN = "step_return"
    BREAKPOINT = "breakpoint"
    CONTINUE = "continue"
    INV_STEP_INTO = "inv_step_into"
    INV_STEP_OVER = "inv_step_over"
    INV_STEP_CALL = "inv_step_call"

    @property
    def is_forward(self) -> bool:
        return self in _FORWARD_TAGS

    @property
    def is_inverse(self) -> bool:
        return not self.is_forward


_FORWARD_TAGS = frozenset(
    {
        ActionTag.STEP_INTO,
        ActionTag.STEP_OVER,
        ActionTag.STEP_RETURN,
        ActionTag.BREAKPOINT,
        ActionTag.CONTINUE,
    }
)

FORWARD_ACTION_TAGS = tuple(sorted(_FORWARD_TAGS, key=lambda t: t.value))
INVERSE_ACTION_TAGS = (
    ActionTag.INV_STEP_INTO,
    ActionTag.INV_STEP_OVER,
    ActionTag.INV_STEP_CALL,
)

# step_return is repurposed for argument prediction on inverse trees;
# breakpoint and continue have no inverse counterpart.
FORWARD_TO_INVERSE_TAG = {
    ActionTag.STEP_INTO: ActionTag.INV_STEP_INTO,
    ActionTag.STEP_OVER: ActionTag.INV_STEP_OVER,
    ActionTag.STEP_RETURN: ActionTag.INV_STEP_CALL,
}


class ExitCode(Enum):
    """Trajectory terminators.

    Forward trajectories end with the recorded program outcome; inverse
    trajectories always terminate at the entry of the traced scope.
    """

    NORMAL = "normal"
    ERROR = "error"
    NEVER = "never"
    ENTRY = "entry"


@dataclass(frozen=True)
class DebuggerAction:
    """A debugger action; only breakpoint carries a payload (the target line)."""

    tag: ActionTag
    src_target: Optional[str] = None

    def __post_init__(self) -> None:
        if self.tag is ActionTag.BREAKPOINT:
            if not self.src_target:
                raise ValueError("breakpoint action requires a non-empty src_target")
        elif self.src_target is not None:
            raise ValueError(f"{self.tag.value} action takes no src_target")

    @property
    def is_forward(self) -> bool:
        return self.tag.is_forward


@dataclass(frozen=True)
class FrameEvent:
    """One recorded interpreter event.

    ``locals`` maps variable names to repr text in recorded (insertion)
    order. ``arg`` carries the return value or exception payload repr and is
    present exactly for return/exception events. ``depth`` is the 0-based
    call-stack depth of the frame the event fired in.
    """

    seq_index: int
    kind: EventKind
    src: str
    line_no: int
    func_name: str
    code_block_id: str
    locals: dict[str, str]
    arg: Optional[str]
    depth: int


class MalformedTraceError(ValueError):
    """Raised when an event stream violates the depth/balance invariants."""

    def __init__(self, message: str, index: Optional[int] = None) -> None:
        self.index = index
        if index is not None:
            message = f"event {index}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LocalsView:
    """The locals payload actually emitted for a state.

    ``entries`` is a subset of the underlying frame locals, in recorded
    order. ``elided`` records whether the ``".." : ".."`` omission marker is
    present; ``full`` means every local is shown (implies not elided).
    """

    entries: tuple[tuple[str, str], ...]
    elided: bool
    full: bool

    def __post_init__(self) -> None:
        if self.full and self.elided:
            raise ValueError("a full locals view cannot carry the elision marker")

    def as_dict(self) -> dict[str, str]:
        return dict(self.entries)


def diff_locals(prev: dict[str, str], curr: dict[str, str]) -> LocalsView:
    """View showing only entries that changed or appeared relative to ``prev``.

    Unchanged keys are omitted and flagged through ``elided``. Keys deleted
    between the two snapshots are not represented at all; they silently
    disappear at the next full view.
    """

    entries = tuple((k, v) for k, v in curr.items() if prev.get(k) != v)
    omitted = any(k in prev and prev[k] == v for k, v in curr.items())
    return LocalsView(entries=entries, elided=omitted, full=False)


def full_locals(curr: dict[str, str]) -> LocalsView:
    """View showing every local in recorded order (used at scope changes)."""

    return LocalsView(entries=tuple(curr.items()), elided=False, full=True)


@dataclass(frozen=True)
class EmittedState:
    """A state as it appears in a trajectory: event kind, source line, and
    either a locals view (call/line kinds) or an argument payload
    (return/exception kinds)."""

    kind: EventKind
    src: str
    view: Optional[LocalsView]
    arg: Optional[str]


@dataclass(frozen=True)
class Step:
    """One (state, action) pair. ``action`` is None only in parsed prefixes
    that were truncated right after a state."""

    state: EmittedState
    action: Optional[DebuggerAction]


@dataclass(frozen=True)
class Trajectory:
    """A full or truncated debugger trajectory.

    ``exit`` is None only for truncated (prompt-form) trajectories produced
    by the parser. ``steps`` may be empty for a bare-exit trace.
    """

    direction: str  # "forward" | "inverse"
    code_context: str
    steps: tuple[Step, ...]
    exit: Optional[ExitCode]

    def __post_init__(self) -> None:
        if self.direction not in ("forward", "inverse"):
            raise ValueError(f"bad direction {self.direction!r}")

    @property
    def is_complete(self) -> bool:
        return self.exit is not None

"""Formal trace language: serialization to the special-token grammar and back.

Canonical byte form: no whitespace between special tokens and payloads; the
code context keeps its own newlines and ends with one trailing newline
before the first frame separator. Locals and argument payloads are JSON
(compact, ``", "``/``": "`` separators, key order preserved); the elision
marker ``"..": ".."`` always comes first. Any ``<|`` inside payload or
source text is escaped as ``<\\|`` so token boundaries cannot be injected.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    ActionTag,
    DebuggerAction,
    EmittedState,
    EventKind,
    ExitCode,
    LocalsView,
    Step,
    Trajectory,
)

BOT = "<|begin_of_text|>"
TCS = "<|trace_context_start|>"
FRAME = "<|frame_sep|>"
SRC = "<|src_sep|>"
ARG = "<|arg_sep|>"
ASEP = "<|action_sep|>"
TRACE_END = "<|trace_end|>"
EOT = "<|end_of_text|>"

STATE_TOKEN_BY_KIND = {
    EventKind.CALL: "<|call_sep|>",
    EventKind.LINE: "<|line_sep|>",
    EventKind.RETURN: "<|return_sep|>",
    EventKind.EXCEPTION: "<|exception_sep|>",
    EventKind.INV_CALL: "<|inv_call_sep|>",
    EventKind.INV_LINE: "<|inv_line_sep|>",
    EventKind.INV_LINE_CALL: "<|inv_line_call|>",
    EventKind.INV_RETURN: "<|inv_return_sep|>",
    EventKind.INV_EXCEPTION: "<|inv_exception_sep|>",
}
KIND_BY_STATE_TOKEN = {v: k for k, v in STATE_TOKEN_BY_KIND.items()}

ACTION_TOKEN_BY_TAG = {
    ActionTag.STEP_INTO: "<|step_into|>",
    ActionTag.STEP_OVER: "<|step_over|>",
    ActionTag.STEP_RETURN: "<|step_return|>",
    ActionTag.BREAKPOINT: "<|breakpoint|>",
    ActionTag.CONTINUE: "<|continue|>",
    ActionTag.INV_STEP_INTO: "<|inv_step_into|>",
    ActionTag.INV_STEP_OVER: "<|inv_step_over|>",
    ActionTag.INV_STEP_CALL: "<|inv_step_call|>",
}
TAG_BY_ACTION_TOKEN = {v: k for k, v in ACTION_TOKEN_BY_TAG.items()}

EXIT_TOKEN_BY_CODE = {
    ExitCode.NORMAL: "<|exit_normal|>",
    ExitCode.ERROR: "<|exit_error|>",
    ExitCode.NEVER: "<|exit_never|>",
    ExitCode.ENTRY: "<|inv_exit_entry|>",
}
CODE_BY_EXIT_TOKEN = {v: k for k, v in EXIT_TOKEN_BY_CODE.items()}

SPECIAL_TOKENS = (
    [BOT, TCS, FRAME, SRC, ARG, ASEP, TRACE_END, EOT]
    + list(STATE_TOKEN_BY_KIND.values())
    + list(ACTION_TOKEN_BY_TAG.values())
    + list(EXIT_TOKEN_BY_CODE.values())
)

GRAMMAR_VERSION = "state-layout-v1"


def vocabulary_hash() -> str:
    """Hash over the token vocabulary and layout revision; corpora produced
    with different hashes are not byte-compatible."""

    digest = hashlib.sha256(
        ("\n".join(SPECIAL_TOKENS) + "\n" + GRAMMAR_VERSION).encode("utf-8")
    )
    return digest.hexdigest()[:16]


# Kinds whose payload precedes the source line (forward line states); every
# other state is rendered source-first.
_ARG_FIRST_KINDS = frozenset({EventKind.LINE})
# Kinds whose payload is a JSON dict (locals or call arguments).
_DICT_PAYLOAD_KINDS = frozenset(
    {
        EventKind.CALL,
        EventKind.LINE,
        EventKind.INV_CALL,
        EventKind.INV_LINE,
        EventKind.INV_LINE_CALL,
    }
)

_ESCAPE_RE = re.compile(r"<(\\*)\|")
_UNESCAPE_RE = re.compile(r"<\\(\\*)\|")


def escape_text(text: str) -> str:
    return _ESCAPE_RE.sub(lambda m: "<\\" + m.group(1) + "|", text)


def unescape_text(text: str) -> str:
    return _UNESCAPE_RE.sub(lambda m: "<" + m.group(1) + "|", text)


class GrammarError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


def render_locals(view: LocalsView) -> str:
    pairs = []
    if view.elided:
        pairs.append('"..": ".."')
    for key, value in view.entries:
        pairs.append(
            f"{json.dumps(key, ensure_ascii=False)}: {json.dumps(value, ensure_ascii=False)}"
        )
    return "{" + ", ".join(pairs) + "}"


def render_state(state: EmittedState) -> str:
    token = STATE_TOKEN_BY_KIND[state.kind]
    src = escape_text(state.src)
    if state.kind in _DICT_PAYLOAD_KINDS:
        if state.view is None:
            raise ValueError(f"{state.kind.value} state without a locals view")
        payload = escape_text(render_locals(state.view))
    else:
        if state.arg is None:
            raise ValueError(f"{state.kind.value} state without an argument")
        payload = escape_text(json.dumps(state.arg, ensure_ascii=False))
    if state.kind in _ARG_FIRST_KINDS:
        return f"{token}{ARG}{payload}{SRC}{src}"
    return f"{token}{SRC}{src}{ARG}{payload}"


def render_action(action: DebuggerAction) -> str:
    token = ACTION_TOKEN_BY_TAG[action.tag]
    if action.tag is ActionTag.BREAKPOINT:
        return token + escape_text(action.src_target)
    return token


def render_exit(code: ExitCode) -> str:
    return EXIT_TOKEN_BY_CODE[code] + TRACE_END + EOT


def serialize(trajectory: Trajectory) -> str:
    """Render a complete trajectory in canonical byte form."""

    if trajectory.exit is None:
        raise ValueError("cannot serialize a truncated trajectory")
    parts = [BOT, TCS, escape_text(trajectory.code_context)]
    for step in trajectory.steps:
        if step.action is None:
            raise ValueError("cannot serialize a step without an action")
        parts.append(FRAME)
        parts.append(render_state(step.state))
        parts.append(ASEP)
        parts.append(render_action(step.action))
    parts.append(FRAME)
    parts.append(render_exit(trajectory.exit))
    return "".join(parts)


def serialize_prefix(trajectory: Trajectory, n_steps: int) -> str:
    """Prompt form: the first ``n_steps`` (state, action) pairs followed by a
    trailing frame separator, ready for a model to complete the next state."""

    if not 0 < n_steps <= len(trajectory.steps):
        raise ValueError(f"n_steps {n_steps} out of range")
    parts = [BOT, TCS, escape_text(trajectory.code_context)]
    for step in trajectory.steps[:n_steps]:
        parts.append(FRAME)
        parts.append(render_state(step.state))
        parts.append(ASEP)
        parts.append(render_action(step.action))
    parts.append(FRAME)
    return "".join(parts)


@dataclass
class ParseResult:
    trajectory: Trajectory
    truncated: bool
    consumed: int


_TOKEN_RE = re.compile("|".join(re.escape(t) for t in SPECIAL_TOKENS))


class _TokenStream:
    """Lexer: a sequence of (preceding gap, token, offset) triples over the
    rendered text, with unknown-token detection on every gap."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.items: list[tuple[str, str, int]] = []
        pos = 0
        for m in _TOKEN_RE.finditer(text):
            gap = text[pos : m.start()]
            self._check_gap(gap, pos)
            self.items.append((gap, m.group(0), m.start()))
            pos = m.end()
        self.tail = text[pos:]
        self._check_gap(self.tail, pos)
        self.tail_offset = pos
        self.idx = 0

    @staticmethod
    def _check_gap(gap: str, offset: int) -> None:
        hit = gap.find("<|")
        if hit >= 0:
            raise GrammarError("unknown special token", offset + hit)

    def eof(self) -> bool:
        return self.idx >= len(self.items)

    def peek(self) -> Optional[tuple[str, str, int]]:
        return None if self.eof() else self.items[self.idx]

    def take(self) -> tuple[str, str, int]:
        item = self.items[self.idx]
        self.idx += 1
        return item

    def take_tight(self, expected: Optional[str] = None) -> tuple[str, int]:
        """Consume the next token, requiring no text before it (and, if
        given, requiring the token itself)."""

        if self.eof():
            want = expected or "a special token"
            raise GrammarError(f"expected {want}, found end of input", len(self.text))
        gap, token, offset = self.take()
        if gap:
            raise GrammarError(
                f"unexpected text before {token}", offset - len(gap)
            )
        if expected is not None and token != expected:
            raise GrammarError(f"expected {expected}, found {token}", offset)
        return token, offset

    def consumed_offset(self) -> int:
        if self.idx == 0:
            return 0
        gap, token, offset = self.items[self.idx - 1]
        return offset + len(token)


def _parse_payload_dict(raw: str, offset: int) -> tuple[tuple[tuple[str, str], ...], bool]:
    try:
        data = json.loads(unescape_text(raw))
    except json.JSONDecodeError as exc:
        raise GrammarError(f"malformed JSON payload: {exc.msg}", offset) from exc
    if not isinstance(data, dict):
        raise GrammarError("locals payload is not a JSON object", offset)
    elided = False
    entries = []
    for key, value in data.items():
        if key == ".." and value == "..":
            elided = True
            continue
        if not isinstance(value, str):
            raise GrammarError(f"locals value for {key!r} is not a string", offset)
        entries.append((key, value))
    return tuple(entries), elided


def _parse_payload_str(raw: str, offset: int) -> str:
    try:
        data = json.loads(unescape_text(raw))
    except json.JSONDecodeError as exc:
        raise GrammarError(f"malformed JSON payload: {exc.msg}", offset) from exc
    if not isinstance(data, str):
        raise GrammarError("argument payload is not a JSON string", offset)
    return data


def _build_state(
    kind: EventKind,
    src_raw: str,
    payload_raw: str,
    payload_offset: int,
    prev_state: Optional[EmittedState],
    first: bool,
    after_breakpoint: bool,
) -> EmittedState:
    src = unescape_text(src_raw)
    if kind in _DICT_PAYLOAD_KINDS:
        entries, elided = _parse_payload_dict(payload_raw, payload_offset)
        if kind in (EventKind.CALL, EventKind.INV_CALL):
            full = True
        elif kind.is_forward:
            full = first or after_breakpoint or (
                prev_state is not None and prev_state.kind is EventKind.RETURN
            )
        else:
            full = first or (
                prev_state is not None and prev_state.kind is EventKind.INV_CALL
            )
        if elided:
            full = False
        view = LocalsView(entries=entries, elided=elided, full=full)
        return EmittedState(kind=kind, src=src, view=view, arg=None)
    arg = _parse_payload_str(payload_raw, payload_offset)
    return EmittedState(kind=kind, src=src, view=None, arg=arg)


def parse(text: str) -> ParseResult:
    """Parse rendered grammar text back into a trajectory.

    Accepts complete traces and clean prefixes: input ending right after an
    action, after an action plus frame separator, or after a complete state
    parses as a truncated trajectory. Anything else raises GrammarError with
    a byte offset.
    """

    ts = _TokenStream(text)
    ts.take_tight(BOT)
    ts.take_tight(TCS)
    if ts.eof():  # nothing but the context: a degenerate prefix
        traj = Trajectory(
            direction="forward", code_context=unescape_text(ts.tail), steps=(), exit=None
        )
        return ParseResult(trajectory=traj, truncated=True, consumed=len(text))
    gap, token, offset = ts.take()
    if token != FRAME:
        raise GrammarError(f"expected {FRAME} after the code context, found {token}", offset)
    context = unescape_text(gap)

    steps: list[Step] = []
    exit_code: Optional[ExitCode] = None
    direction: Optional[str] = None
    truncated = False
    prev_state: Optional[EmittedState] = None
    last_action: Optional[DebuggerAction] = None

    while True:
        if ts.eof():
            if ts.tail:
                raise GrammarError("trailing text after a frame separator", ts.tail_offset)
            truncated = True  # prompt form: ends right after FRAME
            break
        token, offset = ts.take_tight()
        if token in CODE_BY_EXIT_TOKEN:
            exit_code = CODE_BY_EXIT_TOKEN[token]
            ts.take_tight(TRACE_END)
            ts.take_tight(EOT)
            if not ts.eof():
                _, tok, off = ts.peek()
                raise GrammarError(f"unexpected {tok} after {EOT}", off)
            if ts.tail:
                raise GrammarError("unexpected text after end of trace", ts.tail_offset)
            break
        if token not in KIND_BY_STATE_TOKEN:
            raise GrammarError(f"expected a state or exit token, found {token}", offset)
        kind = KIND_BY_STATE_TOKEN[token]
        arg_first = kind in _ARG_FIRST_KINDS
        first_sep, second_sep = (ARG, SRC) if arg_first else (SRC, ARG)
        got = ts.peek()
        if got is None or got[1] not in (SRC, ARG):
            where = len(text) if got is None else got[2]
            raise GrammarError(f"{kind.value} state truncated before its fields", where)
        sep_tok, sep_off = ts.take_tight()
        if sep_tok != first_sep:
            raise GrammarError(
                f"{kind.value} state fields out of order: found {sep_tok}, "
                f"expected {first_sep}",
                sep_off,
            )
        if ts.eof():
            raise GrammarError("state truncated inside its fields", len(text))
        field1, tok2, off2 = ts.take()
        if tok2 != second_sep:
            raise GrammarError(f"expected {second_sep}, found {tok2}", off2)
        # The second field runs to the step's action separator (or input end
        # for a prefix truncated right after the state).
        if ts.eof():
            field2 = ts.tail
            state = _make_state(
                kind, arg_first, field1, field2, sep_off, off2,
                prev_state, not steps, last_action,
            )
            _check_direction(direction, state, offset)
            steps.append(Step(state=state, action=None))
            truncated = True
            break
        field2, tok3, off3 = ts.take()
        state = _make_state(
            kind, arg_first, field1, field2, sep_off, off2,
            prev_state, not steps, last_action,
        )
        direction = _check_direction(direction, state, offset)
        if tok3 != ASEP:
            raise GrammarError(f"expected {ASEP} after a state, found {tok3}", off3)
        act_token, act_offset = ts.take_tight()
        if act_token not in TAG_BY_ACTION_TOKEN:
            raise GrammarError(f"expected an action token, found {act_token}", act_offset)
        tag = TAG_BY_ACTION_TOKEN[act_token]
        if tag.is_forward != (direction == "forward"):
            raise GrammarError(f"{tag.value} action in a {direction} trace", act_offset)
        if ts.eof():
            trailing, trailing_off = ts.tail, ts.tail_offset
            next_is_frame = False
        else:
            trailing, nxt, nxt_off = ts.take()
            trailing_off = nxt_off - len(trailing)
            if nxt != FRAME:
                raise GrammarError(f"expected {FRAME} after an action, found {nxt}", nxt_off)
            next_is_frame = True
        if tag is ActionTag.BREAKPOINT:
            target = unescape_text(trailing)
            if not target:
                raise GrammarError("breakpoint action without a target line", act_offset)
            action = DebuggerAction(tag=tag, src_target=target)
        else:
            if trailing:
                raise GrammarError(f"unexpected text after {act_token}", trailing_off)
            action = DebuggerAction(tag=tag)
        steps.append(Step(state=state, action=action))
        prev_state = state
        last_action = action
        if not next_is_frame:
            truncated = True  # prompt truncated right after the action
            break

    if direction is None:
        direction = "inverse" if exit_code is ExitCode.ENTRY else "forward"
    if exit_code is None:
        truncated = True
    trajectory = Trajectory(
        direction=direction,
        code_context=context,
        steps=tuple(steps),
        exit=exit_code,
    )
    return ParseResult(trajectory=trajectory, truncated=truncated, consumed=ts.consumed_offset())


def _make_state(
    kind: EventKind,
    arg_first: bool,
    field1: str,
    field2: str,
    off1: int,
    off2: int,
    prev_state: Optional[EmittedState],
    first: bool,
    last_action: Optional[DebuggerAction],
) -> EmittedState:
    if arg_first:
        payload_raw, payload_off, src_raw = field1, off1, field2
    else:
        src_raw, payload_raw, payload_off = field1, field2, off2
    return _build_state(
        kind,
        src_raw,
        payload_raw,
        payload_off,
        prev_state,
        first,
        after_breakpoint=(
            last_action is not None and last_action.tag is ActionTag.BREAKPOINT
        ),
    )


def _check_direction(direction: Optional[str], state: EmittedState, offset: int) -> str:
    state_dir = "forward" if state.kind.is_forward else "inverse"
    if direction is None:
        return state_dir
    if direction != state_dir:
        raise GrammarError(f"{state.kind.value} state in a {direction} trace", offset)
    return direction


def parse_state_fragment(text: str):
    """Parse a single state (or a bare exit token) from prediction text.

    Returns an EmittedState or an ExitCode; raises GrammarError on anything
    else. Content after one complete state is ignored, matching how scored
    completions are cut at the next frame boundary.
    """

    ts = _TokenStream(text)
    token, offset = ts.take_tight()
    if token == FRAME:
        token, offset = ts.take_tight()
    if token in CODE_BY_EXIT_TOKEN:
        return CODE_BY_EXIT_TOKEN[token]
    if token not in KIND_BY_STATE_TOKEN:
        raise GrammarError(f"expected a state token, found {token}", offset)
    kind = KIND_BY_STATE_TOKEN[token]
    arg_first = kind in _ARG_FIRST_KINDS
    first_sep, second_sep = (ARG, SRC) if arg_first else (SRC, ARG)
    _, sep_off = ts.take_tight(first_sep)
    if ts.eof():
        raise GrammarError("state truncated inside its fields", len(text))
    field1, tok2, off2 = ts.take()
    if tok2 != second_sep:
        raise GrammarError(f"expected {second_sep}, found {tok2}", off2)
    if ts.eof():
        field2 = ts.tail
    else:
        field2 = ts.peek()[0]
    # Locals-view full/elided context is unknown for a bare fragment; only
    # entries and the marker matter for scoring.
    return _make_state(kind, arg_first, field1, field2, sep_off, off2, None, False, None)


@dataclass
class Measure:
    """Deterministic size/count summary of one trajectory. Payload characters
    stand in for subword-token counts throughout the corpus statistics."""

    special_tokens: int
    payload_chars: int
    context_chars: int
    n_states: int
    action_counts: Counter = field(default_factory=Counter)
    event_counts: Counter = field(default_factory=Counter)

    @property
    def token_proxy(self) -> int:
        return self.special_tokens + self.payload_chars


def measure(trajectory: Trajectory) -> Measure:
    """Count special tokens, payload characters, and per-tag/kind totals."""

    specials = 2  # begin_of_text + trace_context_start
    payload = len(trajectory.code_context)
    actions: Counter = Counter()
    events: Counter = Counter()
    for step in trajectory.steps:
        state = step.state
        specials += 4  # frame_sep + kind token + src_sep + arg_sep
        payload += len(state.src)
        if state.kind in _DICT_PAYLOAD_KINDS:
            payload += len(render_locals(state.view))
        else:
            payload += len(json.dumps(state.arg, ensure_ascii=False))
        events[state.kind.value] += 1
        if step.action is not None:
            specials += 2  # action_sep + action token
            actions[step.action.tag.value] += 1
            if step.action.tag is ActionTag.BREAKPOINT:
                payload += len(step.action.src_target)
    if trajectory.exit is not None:
        specials += 4  # frame_sep + exit token + trace_end + end_of_text
    return Measure(
        special_tokens=specials,
        payload_chars=payload,
        context_chars=len(trajectory.code_context),
        n_states=len(trajectory.steps),
        action_counts=actions,
        event_counts=events,
    )

"""Stochastic data-generating action policy and trajectory sampling.

The default policy mixes two categorical distributions with equal weight:
one over all five forward actions (step_into .35, step_over .1,
step_return .2, breakpoint .1, continue .05, renormalized to sum 1) and one
over step_into/step_over only. On inverse trees breakpoint and continue are
disabled and step_return maps to inv_step_call; rows are renormalized over
the remaining tags.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Optional

from .engine import Cursor, apply
from .model import (
    ActionTag,
    DebuggerAction,
    EmittedState,
    EventKind,
    FORWARD_TO_INVERSE_TAG,
    LocalsView,
    Step,
    Trajectory,
    diff_locals,
    full_locals,
)
from .tree import StateNode, StateTree

DEFAULT_MIXTURES: tuple[tuple[float, tuple[tuple[ActionTag, float], ...]], ...] = (
    (
        0.5,
        (
            (ActionTag.STEP_INTO, 0.35),
            (ActionTag.STEP_OVER, 0.10),
            (ActionTag.STEP_RETURN, 0.20),
            (ActionTag.BREAKPOINT, 0.10),
            (ActionTag.CONTINUE, 0.05),
        ),
    ),
    (
        0.5,
        (
            (ActionTag.STEP_INTO, 0.5),
            (ActionTag.STEP_OVER, 0.5),
        ),
    ),
)

BREAKPOINT_TARGET_RULES = ("future_visited_line", "any_program_line")


@dataclass(frozen=True)
class PolicyConfig:
    """Action policy configuration.

    ``mixtures`` holds (weight, categorical) pairs; weights and each
    categorical are normalized to sum 1 at sampling time. ``max_units``
    bounds the emitted size of one trajectory (special tokens plus payload
    characters, the same proxy measure() reports); budget-hit trajectories
    are closed with a continue action and the recorded exit.
    """

    mixtures: tuple[tuple[float, tuple[tuple[ActionTag, float], ...]], ...] = (
        DEFAULT_MIXTURES
    )
    breakpoint_target_rule: str = "future_visited_line"
    breakpoint_miss_prob: float = 0.05
    seed: int = 0
    max_units: int = 16384

    def __post_init__(self) -> None:
        if not self.mixtures:
            raise ValueError("policy needs at least one mixture component")
        if self.breakpoint_target_rule not in BREAKPOINT_TARGET_RULES:
            raise ValueError(
                f"unknown breakpoint_target_rule {self.breakpoint_target_rule!r}"
            )
        if not 0.0 <= self.breakpoint_miss_prob <= 1.0:
            raise ValueError("breakpoint_miss_prob must be in [0, 1]")
        for weight, row in self.mixtures:
            if weight < 0 or not row:
                raise ValueError("mixture components need a non-negative weight "
                                 "and a non-empty categorical")
            for tag, prob in row:
                if not tag.is_forward:
                    raise ValueError(
                        "mixtures are defined over forward tags; inverse "
                        "mapping happens at sampling time"
                    )
                if prob < 0:
                    raise ValueError(f"negative probability for {tag.value}")
        if sum(w for w, _ in self.mixtures) <= 0:
            raise ValueError("mixture weights must sum to a positive value")

    def rows_for(self, direction: str) -> tuple[tuple[float, tuple[tuple[ActionTag, float], ...]], ...]:
        """Weight-normalized mixture rows, remapped/renormalized per direction.

        Rows left without any usable action (all tags disabled for the
        direction) are dropped and the surviving weights renormalized.
        """

        rows = []
        for w, row in self.mixtures:
            if direction == "inverse":
                row = tuple(
                    (FORWARD_TO_INVERSE_TAG[t], p)
                    for t, p in row
                    if t in FORWARD_TO_INVERSE_TAG
                )
            total_p = sum(p for _, p in row)
            if total_p <= 0:
                continue
            rows.append((w, tuple((t, p / total_p) for t, p in row)))
        if not rows:
            raise ValueError("policy has no usable actions for this direction")
        total_w = sum(w for w, _ in rows)
        return tuple((w / total_w, row) for w, row in rows)

    @classmethod
    def table_default(cls, **overrides) -> "PolicyConfig":
        return cls(**overrides)

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        mixtures = tuple(
            (
                float(comp["weight"]),
                tuple(
                    (ActionTag(tag), float(p)) for tag, p in comp["probs"].items()
                ),
            )
            for comp in data.get("mixtures", [])
        ) or DEFAULT_MIXTURES
        return cls(
            mixtures=mixtures,
            breakpoint_target_rule=data.get(
                "breakpoint_target_rule", "future_visited_line"
            ),
            breakpoint_miss_prob=float(data.get("breakpoint_miss_prob", 0.05)),
            seed=int(data.get("seed", 0)),
            max_units=int(data.get("max_units", 16384)),
        )

    @classmethod
    def from_file(cls, path: str) -> "PolicyConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "mixtures": [
                {"weight": w, "probs": {t.value: p for t, p in row}}
                for w, row in self.mixtures
            ],
            "breakpoint_target_rule": self.breakpoint_target_rule,
            "breakpoint_miss_prob": self.breakpoint_miss_prob,
            "seed": self.seed,
            "max_units": self.max_units,
        }


def sample_action(cfg: PolicyConfig, cursor: Cursor, rng: random.Random) -> DebuggerAction:
    """Draw one action: mixture component by weight, tag by categorical,
    breakpoint target per the configured rule."""

    rows = cfg.rows_for(cursor.tree.direction)
    r = rng.random()
    acc = 0.0
    row = rows[-1][1]
    for w, candidate in rows:
        acc += w
        if r < acc:
            row = candidate
            break
    r = rng.random()
    acc = 0.0
    tag = row[-1][0]
    for t, p in row:
        acc += p
        if r < acc:
            tag = t
            break
    if tag is ActionTag.BREAKPOINT:
        return DebuggerAction(tag=tag, src_target=_draw_breakpoint_target(cfg, cursor, rng))
    return DebuggerAction(tag=tag)


def _distinct(values) -> list[str]:
    return list(dict.fromkeys(values))


def _draw_breakpoint_target(cfg: PolicyConfig, cursor: Cursor, rng: random.Random) -> str:
    tree = cursor.tree
    start = 0 if cursor.at_entry else cursor.node.order_index + 1
    future = _distinct(n.event.src for n in tree.order[start:])
    program_lines = _distinct(
        [ln for ln in tree.code_context.splitlines() if ln.strip()]
        + [n.event.src for n in tree.order]
    )
    if cfg.breakpoint_target_rule == "any_program_line":
        pool = program_lines or future
        return pool[rng.randrange(len(pool))]
    missing = [ln for ln in program_lines if ln not in set(future)]
    if missing and (not future or rng.random() < cfg.breakpoint_miss_prob):
        return missing[rng.randrange(len(missing))]
    pool = future or missing or program_lines
    return pool[rng.randrange(len(pool))]


def emit_state(
    node: StateNode,
    prev_node: Optional[StateNode],
    via_breakpoint: bool = False,
) -> EmittedState:
    """Render a tree node as the state a trajectory emits at it.

    Call kinds carry the full argument map, return/exception kinds carry the
    event argument, line kinds carry a locals view: a diff against the
    previous emitted state's recorded locals, or the full map after a scope
    change (a forward return, an inverse call ascent, a breakpoint landing,
    or the first state of a trajectory).
    """

    ev = node.event
    kind = ev.kind
    if kind in (EventKind.CALL, EventKind.INV_CALL):
        return EmittedState(kind=kind, src=ev.src, view=full_locals(ev.locals), arg=None)
    if kind in (
        EventKind.RETURN,
        EventKind.EXCEPTION,
        EventKind.INV_RETURN,
        EventKind.INV_EXCEPTION,
    ):
        return EmittedState(kind=kind, src=ev.src, view=None, arg=ev.arg)
    show_full = (
        prev_node is None
        or via_breakpoint
        or prev_node.event.kind in (EventKind.RETURN, EventKind.INV_CALL)
    )
    view = full_locals(ev.locals) if show_full else diff_locals(prev_node.event.locals, ev.locals)
    return EmittedState(kind=kind, src=ev.src, view=view, arg=None)


def _state_units(state: EmittedState) -> int:
    # frame_sep + kind sep + src_sep + arg_sep plus payload characters;
    # mirrors the token-proxy reported by measure().
    payload = len(state.arg) if state.arg is not None else _view_chars(state.view)
    return 4 + len(state.src) + payload


def _view_chars(view: Optional[LocalsView]) -> int:
    if view is None:
        return 0
    n = 2 + sum(len(k) + len(v) + 6 for k, v in view.entries)
    return n + (10 if view.elided else 0)


def sample_trajectory(tree: StateTree, cfg: PolicyConfig, rng: random.Random) -> Trajectory:
    """Sample one trajectory: an implicit initial step_into emits the first
    recorded state, then actions are drawn and applied until an exit.

    When the emitted-size budget would be exceeded, a forward trajectory is
    closed with a continue action; an inverse one with inv_step_call
    applications, which reach the entry exit within two extra states.
    """

    if not tree.order:
        raise ValueError("cannot sample from an empty tree")
    inverse = tree.direction == "inverse"
    node = tree.order[0]
    state = emit_state(node, None)
    steps: list[Step] = []
    units = len(tree.code_context) + 2 + _state_units(state)
    exit_code = None
    while True:
        if units > cfg.max_units:
            if not inverse:
                steps.append(Step(state=state, action=DebuggerAction(ActionTag.CONTINUE)))
                exit_code = tree.exit_code
                break
            action = DebuggerAction(ActionTag.INV_STEP_CALL)
        else:
            action = sample_action(cfg, Cursor(tree=tree, node=node), rng)
        steps.append(Step(state=state, action=action))
        result = apply(Cursor(tree=tree, node=node), action)
        if result.is_exit:
            exit_code = result.exit
            break
        prev = node
        node = result.node
        state = emit_state(node, prev, via_breakpoint=action.tag is ActionTag.BREAKPOINT)
        units += _state_units(state)
    return Trajectory(
        direction=tree.direction,
        code_context=tree.code_context,
        steps=tuple(steps),
        exit=exit_code,
    )

"""Deterministic reference debugger: actions as traversal rules on a state tree.

Every (cursor, action) pair resolves to exactly one successor node or an
exit. Forward trees exit with the recorded program outcome; inverse trees
exit with ``entry`` once traversal passes the first recorded state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import ActionTag, DebuggerAction, EventKind, ExitCode
from .tree import StateNode, StateTree


class DirectionError(ValueError):
    """Action direction does not match the tree direction."""


class CursorAtExit(ValueError):
    """No action can be applied once a trajectory has exited."""


@dataclass(frozen=True)
class Cursor:
    """Position in a tree: a node, the entry point before the first state,
    or the terminal exit (which accepts no further actions)."""

    tree: StateTree
    node: Optional[StateNode] = None
    at_exit: bool = False

    @classmethod
    def entry(cls, tree: StateTree) -> "Cursor":
        return cls(tree=tree, node=None)

    @property
    def at_entry(self) -> bool:
        return self.node is None and not self.at_exit


@dataclass(frozen=True)
class TransitionResult:
    node: Optional[StateNode] = None
    exit: Optional[ExitCode] = None

    @property
    def is_exit(self) -> bool:
        return self.exit is not None


def apply(cursor: Cursor, action: DebuggerAction) -> TransitionResult:
    """Resolve one debugger action against the tree.

    step_into advances to the immediate next in-order node. step_over
    advances along the current sibling level, ascending at its end and never
    descending. step_return / inv_step_call jump to the first strictly-future
    return / inv_call node of the current level. breakpoint jumps to the
    first future node (any level) whose source line equals the target
    verbatim. continue jumps straight to the exit. Any miss, and any action
    past the last node, yields the tree's exit.
    """

    tree = cursor.tree
    if cursor.at_exit:
        raise CursorAtExit("the trajectory has already exited")
    if action.tag.is_forward != (tree.direction == "forward"):
        raise DirectionError(
            f"{action.tag.value} action on a {tree.direction} tree"
        )
    tag = action.tag
    if tag in (ActionTag.STEP_INTO, ActionTag.INV_STEP_INTO):
        return _in_order_next(cursor)
    if tag in (ActionTag.STEP_OVER, ActionTag.INV_STEP_OVER):
        return _level_next(cursor)
    if tag is ActionTag.STEP_RETURN:
        return _scan_level(cursor, EventKind.RETURN)
    if tag is ActionTag.INV_STEP_CALL:
        return _scan_level(cursor, EventKind.INV_CALL)
    if tag is ActionTag.BREAKPOINT:
        return _scan_src(cursor, action.src_target)
    if tag is ActionTag.CONTINUE:
        return _exit(tree)
    raise AssertionError(f"unhandled action {tag}")


def replay(tree: StateTree, actions: list[DebuggerAction]) -> list[TransitionResult]:
    """Fold apply() from the entry cursor, stopping at the first exit."""

    results: list[TransitionResult] = []
    cursor = Cursor.entry(tree)
    for action in actions:
        result = apply(cursor, action)
        results.append(result)
        if result.is_exit:
            break
        cursor = Cursor(tree=tree, node=result.node)
    return results


def _exit(tree: StateTree) -> TransitionResult:
    code = ExitCode.ENTRY if tree.direction == "inverse" else tree.exit_code
    return TransitionResult(exit=code)


def _in_order_next(cursor: Cursor) -> TransitionResult:
    order = cursor.tree.order
    idx = -1 if cursor.at_entry else cursor.node.order_index
    if idx + 1 < len(order):
        return TransitionResult(node=order[idx + 1])
    return _exit(cursor.tree)


def _level_next(cursor: Cursor) -> TransitionResult:
    if cursor.at_entry:
        roots = cursor.tree.roots
        if roots:
            return TransitionResult(node=roots[0])
        return _exit(cursor.tree)
    node = cursor.node
    while node is not None:
        level, pos = node.level, node.level_pos
        if pos + 1 < len(level):
            return TransitionResult(node=level[pos + 1])
        node = node.parent
    return _exit(cursor.tree)


def _scan_level(cursor: Cursor, kind: EventKind) -> TransitionResult:
    if cursor.at_entry:
        candidates = cursor.tree.roots
    else:
        node = cursor.node
        candidates = node.level[node.level_pos + 1 :]
    for sibling in candidates:
        if sibling.event.kind is kind:
            return TransitionResult(node=sibling)
    return _exit(cursor.tree)


def _scan_src(cursor: Cursor, src: str) -> TransitionResult:
    order = cursor.tree.order
    start = 0 if cursor.at_entry else cursor.node.order_index + 1
    for node in order[start:]:
        if node.event.src == src:
            return TransitionResult(node=node)
    return _exit(cursor.tree)

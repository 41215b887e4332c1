"""Evaluation harness: next-state prompt sets, component-wise exact-match
scoring, and CruxEval-style input/output prompts with horizon sweeps.

A prompt is a serialized trace truncated right after an action (trailing
frame separator included); the target is the grammar text of the oracle
successor state, or of the exit. Scoring compares the prediction to the
target component by component: state event, source line, locals dictionary,
return/exception argument. Components absent from the target are N/A and
excluded from the conjunction.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import grammar
from .engine import Cursor, apply
from .model import ActionTag, DebuggerAction, EmittedState, EventKind, ExitCode, Trajectory
from .policy import emit_state
from .tree import (
    StateNode,
    StateTree,
    build_forward_tree,
    build_inverse_tree,
    select_entry_point_at,
)
from .corpus import TraceRun, derive_context, tree_from_run

ExecChecker = Callable[[str, Sequence[str], str], bool]


@dataclass
class PromptCase:
    """One evaluation case: prompt text, target text, and bookkeeping.

    ``horizon_fraction`` is 1.0 for full input/output prediction and decays
    to 0.0 as revealed step states approach the jump target. Input-prediction
    cases carry the function source and reference output so predicted
    arguments can be re-executed.
    """

    case_id: str
    prompt: str
    target: str
    action_tag: ActionTag
    direction: str
    horizon_fraction: float = 0.0
    clamped: bool = False
    input_case: bool = False
    fn_src: Optional[str] = None
    ref_output: Optional[str] = None


@dataclass
class ScoreRecord:
    """Component-wise exact-match outcome. ``None`` marks N/A components;
    ``em`` is the conjunction over present components. ``passed`` is the
    re-execution check for input predictions (None when unavailable)."""

    em: bool
    em_locals: Optional[bool]
    em_arg: Optional[bool]
    em_src: Optional[bool]
    em_evt: Optional[bool]
    n_samples: int = 1
    passed: Optional[bool] = None


def _components(parsed) -> dict[str, Optional[str]]:
    """Canonical component texts of a parsed state or exit."""

    if isinstance(parsed, ExitCode):
        return {
            "evt": grammar.EXIT_TOKEN_BY_CODE[parsed],
            "src": None,
            "locals": None,
            "arg": None,
        }
    state: EmittedState = parsed
    return {
        "evt": grammar.STATE_TOKEN_BY_KIND[state.kind],
        "src": state.src,
        "locals": None if state.view is None else grammar.render_locals(state.view),
        "arg": state.arg,
    }


def _parse_or_none(text: str):
    try:
        return grammar.parse_state_fragment(text)
    except grammar.GrammarError:
        return None


def score(case: PromptCase, prediction: str, n_samples: int = 1) -> ScoreRecord:
    """Exact-match score of one prediction against the case target.

    A malformed prediction scores False on every component the target has.
    """

    target = _components(grammar.parse_state_fragment(case.target))
    parsed = _parse_or_none(prediction)
    pred = _components(parsed) if parsed is not None else None

    def comp(name: str) -> Optional[bool]:
        if target[name] is None:
            return None
        if pred is None:
            return False
        return pred[name] == target[name]

    em_evt = comp("evt")
    em_src = comp("src")
    em_locals = comp("locals")
    em_arg = comp("arg")
    present = [c for c in (em_evt, em_src, em_locals, em_arg) if c is not None]
    return ScoreRecord(
        em=bool(present) and all(present),
        em_locals=em_locals,
        em_arg=em_arg,
        em_src=em_src,
        em_evt=em_evt,
        n_samples=n_samples,
    )


def score_at_k(
    case: PromptCase,
    predictions: Sequence[str],
    k: int,
    exec_checker: Optional[ExecChecker] = None,
) -> ScoreRecord:
    """em@k over the first k predictions: per-component any-match flags, with
    em true iff some single prediction matches every present component.

    For input-prediction cases, pass@k re-executes each predicted argument
    set through ``exec_checker``; without a checker pass@k is unavailable
    (None) while em@k is still computed.
    """

    if len(predictions) < k:
        raise ValueError(f"need at least k={k} predictions, got {len(predictions)}")
    records = [score(case, p) for p in predictions[:k]]

    def any_comp(name: str) -> Optional[bool]:
        values = [getattr(r, name) for r in records]
        if all(v is None for v in values):
            return None
        return any(v for v in values if v is not None)

    passed: Optional[bool] = None
    if case.input_case and exec_checker is not None and case.fn_src is not None:
        passed = False
        for text in predictions[:k]:
            parsed = _parse_or_none(text)
            if not isinstance(parsed, EmittedState) or parsed.view is None:
                continue
            args = [v for _, v in parsed.view.entries]
            if exec_checker(case.fn_src, args, case.ref_output or ""):
                passed = True
                break
    return ScoreRecord(
        em=any(r.em for r in records),
        em_locals=any_comp("em_locals"),
        em_arg=any_comp("em_arg"),
        em_src=any_comp("em_src"),
        em_evt=any_comp("em_evt"),
        n_samples=k,
        passed=passed,
    )


def _target_text(trajectory: Trajectory, step_index: int) -> str:
    if step_index + 1 < len(trajectory.steps):
        return grammar.render_state(trajectory.steps[step_index + 1].state)
    return grammar.render_exit(trajectory.exit)


def build_action_eval_set(
    trajectories: Sequence[Trajectory],
    action_tag: ActionTag,
    n: int,
    rng: random.Random,
) -> list[PromptCase]:
    """Sample n trajectories containing the action and truncate each right
    after one uniformly chosen occurrence; the target is the successor state
    recorded in the trajectory itself (which the oracle produced)."""

    qualifying = [
        (i, t)
        for i, t in enumerate(trajectories)
        if t.is_complete
        and any(s.action is not None and s.action.tag is action_tag for s in t.steps)
    ]
    if len(qualifying) < n:
        warnings.warn(
            f"only {len(qualifying)} of the requested {n} trajectories contain "
            f"{action_tag.value}; returning all of them"
        )
        chosen = qualifying
    else:
        chosen = rng.sample(qualifying, n)
    cases = []
    for corpus_idx, trajectory in chosen:
        occurrences = [
            i
            for i, s in enumerate(trajectory.steps)
            if s.action is not None and s.action.tag is action_tag
        ]
        at = occurrences[rng.randrange(len(occurrences))]
        cases.append(
            PromptCase(
                case_id=f"{action_tag.value}-{corpus_idx}-{at}",
                prompt=grammar.serialize_prefix(trajectory, at + 1),
                target=_target_text(trajectory, at),
                action_tag=action_tag,
                direction=trajectory.direction,
            )
        )
    return cases


# -- CruxEval-style input/output prompts --------------------------------------


@dataclass
class _WrapperTrace:
    """Pre-resolved pieces of a traced main()-wrapper run."""

    tree: StateTree
    call_node: StateNode  # the call into f
    return_node: StateNode  # f's executed return event
    return_line_node: StateNode  # the line event at the executed return
    fn_src: str
    prefix_states: list[EmittedState]  # call main, line, call f


def _resolve_wrapper(run: TraceRun) -> _WrapperTrace:
    tree = tree_from_run(run)
    order = tree.order
    if len(order) < 4 or order[0].kind is not EventKind.CALL:
        raise ValueError("trace does not look like a main() wrapper run")
    call_node = next(
        (n for n in order[1:] if n.kind is EventKind.CALL), None
    )
    if call_node is None:
        raise ValueError("wrapper trace never calls the target function")
    frame = call_node.frame_id
    return_node = next(
        (
            n
            for n in order[call_node.order_index : ]
            if n.kind is EventKind.RETURN and n.frame_id == frame
        ),
        None,
    )
    if return_node is None:
        raise ValueError("target function has no return event in the trace")
    return_line_node = next(
        (
            n
            for n in order[call_node.order_index : return_node.order_index]
            if n.kind is EventKind.LINE and n.event.src == return_node.event.src
        ),
        None,
    )
    if return_line_node is None:
        raise ValueError("no line event matches the executed return statement")
    fn_events = [
        ev for ev in (n.event for n in order) if ev.code_block_id == call_node.event.code_block_id
    ]
    fn_src = derive_context(fn_events, run.module_text)
    states = []
    prev = None
    for node in order[: call_node.order_index + 1]:
        states.append(emit_state(node, prev))
        prev = node
    return _WrapperTrace(
        tree=tree,
        call_node=call_node,
        return_node=return_node,
        return_line_node=return_line_node,
        fn_src=fn_src,
        prefix_states=states,
    )


def _prompt_text(
    context: str, pairs: list[tuple[EmittedState, DebuggerAction]]
) -> str:
    parts = [grammar.BOT, grammar.TCS, grammar.escape_text(context)]
    for state, action in pairs:
        parts.append(grammar.FRAME)
        parts.append(grammar.render_state(state))
        parts.append(grammar.ASEP)
        parts.append(grammar.render_action(action))
    parts.append(grammar.FRAME)
    return "".join(parts)


def build_cruxeval_output_prompt(run: TraceRun, variant: ActionTag) -> PromptCase:
    """Output-prediction prompt: walk to the call of f with step_into, then
    jump with step_return (target: the return frame, scored on the argument)
    or breakpoint on the executed return line (target: the line frame with
    full locals)."""

    if variant not in (ActionTag.STEP_RETURN, ActionTag.BREAKPOINT):
        raise ValueError("output variant must be step_return or breakpoint")
    wrapper = _resolve_wrapper(run)
    step = DebuggerAction(ActionTag.STEP_INTO)
    pairs = [(s, step) for s in wrapper.prefix_states[:-1]]
    if variant is ActionTag.STEP_RETURN:
        jump = DebuggerAction(ActionTag.STEP_RETURN)
    else:
        jump = DebuggerAction(
            ActionTag.BREAKPOINT, src_target=wrapper.return_node.event.src
        )
    pairs.append((wrapper.prefix_states[-1], jump))
    result = apply(Cursor(tree=wrapper.tree, node=wrapper.call_node), jump)
    target_state = emit_state(
        result.node, wrapper.call_node, via_breakpoint=variant is ActionTag.BREAKPOINT
    )
    return PromptCase(
        case_id=f"crux-output-{variant.value}",
        prompt=_prompt_text(wrapper.tree.code_context, pairs),
        target=grammar.render_state(target_state),
        action_tag=variant,
        direction="forward",
        horizon_fraction=1.0,
        fn_src=wrapper.fn_src,
        ref_output=wrapper.return_node.event.arg,
    )


def _inverse_scope(run: TraceRun, wrapper: _WrapperTrace) -> tuple[StateTree, StateNode]:
    """Inverse tree of the traced function's own scope, plus its inv_call."""

    selection = select_entry_point_at(run.events, wrapper.call_node.event.seq_index)
    scope = build_forward_tree(
        selection.events,
        exit_code=run.exit_code,
        code_context=derive_context(selection.events, run.module_text),
    )
    inverse = build_inverse_tree(scope)
    inv_call = next(n for n in inverse.roots if n.kind is EventKind.INV_CALL)
    return inverse, inv_call


def build_cruxeval_input_prompt(run: TraceRun) -> PromptCase:
    """Input-prediction prompt: the function scope's inverse trace opened at
    its return frame, jumped with inv_step_call; the target is the inv_call
    frame with the full input-argument dictionary."""

    wrapper = _resolve_wrapper(run)
    inverse, inv_call = _inverse_scope(run, wrapper)
    first = inverse.order[0]
    jump = DebuggerAction(ActionTag.INV_STEP_CALL)
    pairs = [(emit_state(first, None), jump)]
    result = apply(Cursor(tree=inverse, node=first), jump)
    target_state = emit_state(result.node, first)
    return PromptCase(
        case_id="crux-input-inv_step_call",
        prompt=_prompt_text(inverse.code_context, pairs),
        target=grammar.render_state(target_state),
        action_tag=ActionTag.INV_STEP_CALL,
        direction="inverse",
        horizon_fraction=1.0,
        input_case=True,
        fn_src=wrapper.fn_src,
        ref_output=wrapper.return_node.event.arg,
    )


def _skip_count(tree: StateTree, cursor_node: StateNode, target_node: StateNode) -> int:
    return max(0, target_node.order_index - cursor_node.order_index - 1)


def build_horizon_sweep(
    run: TraceRun,
    variant: ActionTag,
    step_counts: Sequence[int],
    step_action: Optional[ActionTag] = None,
) -> list[PromptCase]:
    """Prompts that reveal ``s`` intermediate states via step actions before
    the final jump, for each requested s.

    The horizon fraction is the number of states the jump skips, normalized
    by the skip count of the full-prediction prompt (s=0), so s=0 yields
    exactly 1.0 and stepping all the way to the target yields 0.0. Step
    counts beyond the available run are clamped and flagged.
    """

    if variant in (ActionTag.STEP_RETURN, ActionTag.BREAKPOINT):
        return _forward_sweep(run, variant, step_counts, step_action or ActionTag.STEP_INTO)
    if variant is ActionTag.INV_STEP_CALL:
        return _inverse_sweep(run, step_counts, step_action or ActionTag.INV_STEP_OVER)
    raise ValueError(f"unsupported sweep variant {variant.value}")


def _forward_sweep(
    run: TraceRun,
    variant: ActionTag,
    step_counts: Sequence[int],
    step_tag: ActionTag,
) -> list[PromptCase]:
    wrapper = _resolve_wrapper(run)
    tree = wrapper.tree
    base = build_cruxeval_output_prompt(run, variant)
    if variant is ActionTag.STEP_RETURN:
        jump = DebuggerAction(ActionTag.STEP_RETURN)
    else:
        jump = DebuggerAction(ActionTag.BREAKPOINT, src_target=wrapper.return_node.event.src)
    # The clamp boundary is the jump's own target from the base cursor, so
    # bookkeeping can never disagree with the transition rules.
    target_node = apply(Cursor(tree=tree, node=wrapper.call_node), jump).node
    base_skip = _skip_count(tree, wrapper.call_node, target_node)
    step = DebuggerAction(step_tag)
    cases = []
    for s in step_counts:
        pairs = [(st, DebuggerAction(ActionTag.STEP_INTO)) for st in wrapper.prefix_states[:-1]]
        node = wrapper.call_node
        state = wrapper.prefix_states[-1]
        clamped = False
        for _ in range(s):
            result = apply(Cursor(tree=tree, node=node), step)
            if result.is_exit or result.node.order_index >= target_node.order_index:
                clamped = True
                break
            pairs.append((state, step))
            prev = node
            node = result.node
            state = emit_state(node, prev)
        pairs.append((state, jump))
        result = apply(Cursor(tree=tree, node=node), jump)
        target_state = emit_state(
            result.node, node, via_breakpoint=variant is ActionTag.BREAKPOINT
        )
        skipped = _skip_count(tree, node, result.node)
        cases.append(
            PromptCase(
                case_id=f"crux-horizon-{variant.value}-s{s}",
                prompt=_prompt_text(tree.code_context, pairs),
                target=grammar.render_state(target_state),
                action_tag=variant,
                direction="forward",
                horizon_fraction=skipped / base_skip if base_skip else 0.0,
                clamped=clamped,
                fn_src=base.fn_src,
                ref_output=base.ref_output,
            )
        )
    return cases


def _inverse_sweep(
    run: TraceRun,
    step_counts: Sequence[int],
    step_tag: ActionTag,
) -> list[PromptCase]:
    wrapper = _resolve_wrapper(run)
    inverse, inv_call = _inverse_scope(run, wrapper)
    jump = DebuggerAction(ActionTag.INV_STEP_CALL)
    step = DebuggerAction(step_tag)
    base_skip = _skip_count(inverse, inverse.order[0], inv_call)
    cases = []
    for s in step_counts:
        node = inverse.order[0]
        state = emit_state(node, None)
        pairs: list[tuple[EmittedState, DebuggerAction]] = []
        clamped = False
        for _ in range(s):
            result = apply(Cursor(tree=inverse, node=node), step)
            if result.is_exit or result.node.order_index >= inv_call.order_index:
                clamped = True
                break
            pairs.append((state, step))
            prev = node
            node = result.node
            state = emit_state(node, prev)
        pairs.append((state, jump))
        result = apply(Cursor(tree=inverse, node=node), jump)
        target_state = emit_state(result.node, node)
        skipped = _skip_count(inverse, node, result.node)
        cases.append(
            PromptCase(
                case_id=f"crux-horizon-inv_step_call-s{s}",
                prompt=_prompt_text(inverse.code_context, pairs),
                target=grammar.render_state(target_state),
                action_tag=ActionTag.INV_STEP_CALL,
                direction="inverse",
                horizon_fraction=skipped / base_skip if base_skip else 0.0,
                clamped=clamped,
                input_case=True,
                fn_src=wrapper.fn_src,
                ref_output=wrapper.return_node.event.arg,
            )
        )
    return cases


# -- record (de)serialization for prompt sets ---------------------------------


def case_to_record(case: PromptCase) -> dict:
    rec = {
        "id": case.case_id,
        "prompt": case.prompt,
        "target": case.target,
        "action": case.action_tag.value,
        "direction": case.direction,
        "horizon_fraction": case.horizon_fraction,
    }
    if case.clamped:
        rec["clamped"] = True
    if case.input_case:
        rec["input_case"] = True
    if case.fn_src is not None:
        rec["fn_src"] = case.fn_src
    if case.ref_output is not None:
        rec["ref_output"] = case.ref_output
    return rec


def case_from_record(rec: dict) -> PromptCase:
    return PromptCase(
        case_id=rec["id"],
        prompt=rec["prompt"],
        target=rec["target"],
        action_tag=ActionTag(rec["action"]),
        direction=rec["direction"],
        horizon_fraction=float(rec.get("horizon_fraction", 0.0)),
        clamped=bool(rec.get("clamped", False)),
        input_case=bool(rec.get("input_case", False)),
        fn_src=rec.get("fn_src"),
        ref_output=rec.get("ref_output"),
    )

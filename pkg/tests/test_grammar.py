from __future__ import annotations

import random

import pytest

from conftest import load_golden
from dbgtrace import grammar
from dbgtrace.corpus import TraceRun, tree_from_run
from dbgtrace.grammar import (
    GrammarError,
    escape_text,
    measure,
    parse,
    parse_state_fragment,
    serialize,
    serialize_prefix,
    unescape_text,
    vocabulary_hash,
)
from dbgtrace.model import ActionTag, EventKind, ExitCode, Step, Trajectory
from dbgtrace.policy import PolicyConfig, sample_trajectory
from dbgtrace.tree import build_forward_tree, build_inverse_tree, select_entry_point_at
from synth import random_run

STEP_ONLY = PolicyConfig(mixtures=((1.0, ((ActionTag.STEP_INTO, 1.0),)),))


def _count_forward_traj(count_run):
    tree = tree_from_run(count_run)
    return sample_trajectory(tree, STEP_ONLY, random.Random(0))


def test_golden_forward_bytes(count_run):
    text = serialize(_count_forward_traj(count_run))
    assert text == load_golden("count_forward.txt")


def test_golden_inverse_bytes(count_run):
    sel = select_entry_point_at(count_run.events, 2)
    sub = TraceRun(events=sel.events, exit_code=count_run.exit_code,
                   module_text=count_run.module_text)
    inverse = build_inverse_tree(tree_from_run(sub))
    traj = sample_trajectory(inverse, STEP_ONLY, random.Random(0))
    assert serialize(traj) == load_golden("count_inverse.txt")


def test_round_trip_count(count_run):
    traj = _count_forward_traj(count_run)
    result = parse(serialize(traj))
    assert not result.truncated
    assert result.trajectory == traj


def test_round_trip_sampled_small():
    rng = random.Random(31)
    cfg = PolicyConfig()
    for _ in range(40):
        run = random_run(rng, n_funcs=3, max_depth=4,
                         exception_prob=0.05 if rng.random() < 0.3 else 0.0,
                         truncate=rng.random() < 0.2)
        fwd = build_forward_tree(run.events, run.exit_code,
                                 code_context=run.module_text)
        for tree in (fwd, build_inverse_tree(fwd)):
            traj = sample_trajectory(tree, cfg, random.Random(rng.randrange(1000)))
            result = parse(serialize(traj))
            assert not result.truncated
            assert result.trajectory == traj


def test_every_prefix_parses(count_run):
    traj = _count_forward_traj(count_run)
    full = serialize(traj)
    for i in range(1, len(traj.steps) + 1):
        prefix = serialize_prefix(traj, i)
        assert full.startswith(prefix)
        result = parse(prefix)
        assert result.truncated
        assert result.trajectory.exit is None
        assert len(result.trajectory.steps) == i
        # Dropping the trailing frame separator is still a clean prefix.
        bare = prefix[: -len(grammar.FRAME)]
        assert parse(bare).truncated


def test_prefix_plus_state_parses(count_run):
    traj = _count_forward_traj(count_run)
    prompt = serialize_prefix(traj, 3)
    target = grammar.render_state(traj.steps[3].state)
    result = parse(prompt + target)
    assert result.truncated
    assert len(result.trajectory.steps) == 4
    assert result.trajectory.steps[3].action is None
    assert result.trajectory.steps[3].state == traj.steps[3].state


def test_bare_exit_trajectory():
    traj = Trajectory(direction="forward", code_context="pass\n", steps=(),
                      exit=ExitCode.NORMAL)
    text = serialize(traj)
    assert text == (
        "<|begin_of_text|><|trace_context_start|>pass\n"
        "<|frame_sep|><|exit_normal|><|trace_end|><|end_of_text|>"
    )
    result = parse(text)
    assert not result.truncated
    assert result.trajectory == traj


def test_wrong_field_order_is_layout_error(count_run):
    traj = _count_forward_traj(count_run)
    text = serialize(traj)
    # Swap the first forward-line state's payload order: line states carry
    # the locals before the source.
    broken = text.replace(
        "<|line_sep|><|arg_sep|>{}<|src_sep|>",
        "<|line_sep|><|src_sep|>{}<|arg_sep|>",
        1,
    )
    with pytest.raises(GrammarError) as err:
        parse(broken)
    assert "out of order" in str(err.value)
    assert err.value.offset > 0


def test_field_swap_fuzz():
    rng = random.Random(37)
    cfg = PolicyConfig()
    swaps = [("<|src_sep|>", "<|arg_sep|>")]
    for _ in range(20):
        run = random_run(rng, n_funcs=2, max_depth=3)
        tree = build_forward_tree(run.events, run.exit_code,
                                  code_context=run.module_text)
        text = serialize(sample_trajectory(tree, cfg, random.Random(1)))
        a, b = swaps[0]
        ia = text.index(a)
        swapped = text[:ia] + b + text[ia + len(a):]
        with pytest.raises(GrammarError):
            parse(swapped)


def test_unknown_token_reported():
    with pytest.raises(GrammarError) as err:
        parse("<|begin_of_text|><|trace_context_start|>x\n<|frame_sep|><|bogus|>")
    assert "unknown special token" in str(err.value)


def test_malformed_json_payload_offset(count_run):
    traj = _count_forward_traj(count_run)
    text = serialize(traj).replace('{"s": "\'berry\'", "t": "\'r\'"}', "{broken", 1)
    with pytest.raises(GrammarError) as err:
        parse(text)
    assert "malformed JSON payload" in str(err.value)


def test_escaping_round_trips():
    weird = ['x = "<|frame_sep|>"', "<|", "a<\\|b", "<\\\\|", "plain"]
    for text in weird:
        assert unescape_text(escape_text(text)) == text
        assert "<|" not in escape_text(text)


def test_payload_with_token_text_survives():
    run = random_run(random.Random(5), n_funcs=1)
    events = list(run.events)
    ev = events[1]
    hostile = dict(ev.locals)
    hostile["s"] = "'<|end_of_text|>'"
    events[1] = type(ev)(
        seq_index=ev.seq_index, kind=ev.kind, src='    s = "<|arg_sep|>"',
        line_no=ev.line_no, func_name=ev.func_name,
        code_block_id=ev.code_block_id, locals=hostile, arg=None, depth=ev.depth,
    )
    tree = build_forward_tree(events, run.exit_code, code_context=run.module_text)
    traj = sample_trajectory(tree, STEP_ONLY, random.Random(0))
    result = parse(serialize(traj))
    assert result.trajectory == traj


def test_parse_state_fragment_kinds():
    state = parse_state_fragment(
        '<|return_sep|><|src_sep|>    return n<|arg_sep|>"2"'
    )
    assert state.kind is EventKind.RETURN and state.arg == "2"
    state = parse_state_fragment(
        '<|line_sep|><|arg_sep|>{"..": "..", "n": "1"}<|src_sep|>    for c in s:'
    )
    assert state.view.elided and state.view.entries == (("n", "1"),)
    code = parse_state_fragment("<|exit_normal|><|trace_end|><|end_of_text|>")
    assert code is ExitCode.NORMAL
    with pytest.raises(GrammarError):
        parse_state_fragment("nonsense")


def test_measure_count_trajectory(count_run):
    traj = _count_forward_traj(count_run)
    m = measure(traj)
    assert m.action_counts == {"step_into": 18}
    assert m.event_counts == {"call": 2, "line": 14, "return": 2}
    assert m.n_states == 18
    # Token/payload split must account for every byte of the canonical form.
    text = serialize(traj)
    token_bytes = sum(
        text.count(tok) * len(tok) for tok in grammar.SPECIAL_TOKENS
    )
    assert m.payload_chars == len(text) - token_bytes


def test_measure_empty_and_prefix(count_run):
    empty = Trajectory(direction="forward", code_context="", steps=(),
                       exit=ExitCode.NORMAL)
    m = measure(empty)
    assert m.n_states == 0 and not m.action_counts and not m.event_counts
    # A three-frame prompt prefix measures call:2 line:1, as does the frozen
    # output-prediction prompt itself.
    traj = _count_forward_traj(count_run)
    prefix = parse(serialize_prefix(traj, 3)).trajectory
    pm = measure(prefix)
    assert pm.event_counts == {"call": 2, "line": 1}
    crux = parse(load_golden("crux_output_step_return_prompt.txt")).trajectory
    assert measure(crux).event_counts == {"call": 2, "line": 1}


def test_vocabulary_hash_stable():
    assert vocabulary_hash() == vocabulary_hash()
    assert len(vocabulary_hash()) == 16
    assert len(grammar.SPECIAL_TOKENS) == 29


def test_parser_never_crashes_on_mutations():
    # Mutated traces must either parse or raise GrammarError, nothing else.
    rng = random.Random(999)
    cfg = PolicyConfig()
    texts = []
    for _ in range(10):
        run = random_run(rng, n_funcs=3, max_depth=4)
        fwd = build_forward_tree(run.events, run.exit_code,
                                 code_context=run.module_text)
        for tree in (fwd, build_inverse_tree(fwd)):
            texts.append(serialize(
                sample_trajectory(tree, cfg, random.Random(rng.randrange(10**6)))
            ))
    junk = ["x", "<|", "|>", "{", '"', "\n", "<|bogus|>"]
    for _ in range(3000):
        text = rng.choice(texts)
        i = rng.randrange(len(text))
        kind = rng.randrange(5)
        if kind == 0:
            text = text[:i] + text[i + rng.randrange(1, 12):]
        elif kind == 1:
            text = text[:i] + rng.choice(junk) + text[i:]
        elif kind == 2:
            text = text[:i] + rng.choice(grammar.SPECIAL_TOKENS) + text[i:]
        elif kind == 3:
            text = text[:i]
        else:
            j = min(len(text), i + rng.randrange(1, 30))
            text = text[:i] + text[i:j] + text[i:]
        try:
            parse(text)
        except GrammarError:
            pass
        try:
            parse_state_fragment(text[:200])
        except GrammarError:
            pass


def test_unicode_and_newline_payloads_round_trip():
    traj = Trajectory(
        direction="forward",
        code_context="def f():\n    s = 'héllo'\n",
        steps=(
            Step(
                state=grammar.parse_state_fragment(
                    '<|call_sep|><|src_sep|>def f():<|arg_sep|>'
                    '{"s": "\'h\\u00e9llo\\nworld\'"}'
                ),
                action=__import__("dbgtrace.model", fromlist=["DebuggerAction"])
                .DebuggerAction(ActionTag.CONTINUE),
            ),
        ),
        exit=ExitCode.NORMAL,
    )
    result = parse(serialize(traj))
    assert result.trajectory.steps[0].state.view.entries == (
        ("s", "'héllo\nworld'"),
    )

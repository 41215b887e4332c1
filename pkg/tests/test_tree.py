from __future__ import annotations

import dataclasses
import random

import pytest

from dbgtrace.corpus import derive_context, tree_from_run
from dbgtrace.model import EventKind, ExitCode, INVERSE_TO_FORWARD, MalformedTraceError
from dbgtrace.tree import (
    build_forward_tree,
    build_inverse_tree,
    select_entry_point,
    select_entry_point_at,
    validate_events,
)
from synth import random_run


def test_count_tree_shape(count_run):
    tree = tree_from_run(count_run)
    assert tree.total_nodes == 18
    # call main, the calling line (holding count's 15 states), return main.
    assert [n.kind for n in tree.roots] == [
        EventKind.CALL,
        EventKind.LINE,
        EventKind.RETURN,
    ]
    assert len(tree.roots[1].children) == 15
    assert [n.event.seq_index for n in tree.order] == list(range(18))
    assert tree.roots[1].subtree_span == (1, 16)


def test_in_order_equals_stream():
    rng = random.Random(11)
    for _ in range(100):
        run = random_run(rng, truncate=rng.random() < 0.2,
                         exception_prob=0.02 if rng.random() < 0.3 else 0.0)
        tree = build_forward_tree(run.events, run.exit_code)
        assert [n.event for n in tree.order] == run.events


def test_depth_bookkeeping_property():
    rng = random.Random(13)
    for _ in range(100):
        run = random_run(rng, truncate=rng.random() < 0.3)
        validate_events(run.events)
        calls = sum(1 for e in run.events if e.kind is EventKind.CALL)
        returns = sum(1 for e in run.events if e.kind is EventKind.RETURN)
        assert calls - returns >= 0  # open frames at stream end


def test_single_call_degenerate():
    run = random_run(random.Random(3))
    tree = build_forward_tree(run.events[:1], ExitCode.NEVER)
    assert tree.total_nodes == 1
    assert tree.roots[0].children == []


def test_malformed_depth_rejected():
    run = random_run(random.Random(5))
    bad = list(run.events)
    bad[1] = dataclasses.replace(bad[1], depth=bad[1].depth + 1)
    with pytest.raises(MalformedTraceError):
        build_forward_tree(bad)


def test_line_outside_frame_rejected():
    run = random_run(random.Random(5))
    with pytest.raises(MalformedTraceError):
        # Stream starting at a non-call event has no open frame.
        validate_events([dataclasses.replace(run.events[1], seq_index=0, depth=0)])


def test_empty_stream_rejected():
    with pytest.raises(MalformedTraceError):
        build_forward_tree([])


def test_inverse_count_tree(count_run):
    tree = tree_from_run(count_run)
    inverse = build_inverse_tree(tree)
    # Exactly one calling line (return count(...)) is duplicated.
    assert inverse.call_dup_count == 1
    assert inverse.total_nodes == tree.total_nodes + 1
    dups = [n for n in inverse.order if n.is_dup]
    assert len(dups) == 1
    assert dups[0].kind is EventKind.INV_LINE_CALL
    assert len(dups[0].children) == 15


def test_inverse_structure_no_calls():
    rng = random.Random(17)
    run = random_run(rng, n_funcs=1)
    tree = build_forward_tree(run.events, run.exit_code)
    inverse = build_inverse_tree(tree)
    assert inverse.call_dup_count == 0
    assert [n.event.seq_index for n in inverse.order] == [
        e.seq_index for e in reversed(run.events)
    ]


def test_inverse_dedup_reversal_property():
    rng = random.Random(19)
    for _ in range(60):
        run = random_run(rng, n_funcs=4, max_depth=5)
        tree = build_forward_tree(run.events, run.exit_code)
        inverse = build_inverse_tree(tree)
        calling_lines = sum(1 for n in tree.order if n.children)
        assert inverse.call_dup_count == calling_lines
        assert inverse.total_nodes == tree.total_nodes + calling_lines
        restored = [
            (n.event.seq_index, INVERSE_TO_FORWARD[n.kind])
            for n in reversed(inverse.order)
            if not n.is_dup
        ]
        assert restored == [(n.event.seq_index, n.kind) for n in tree.order]


def test_inverse_dup_precedes_callee_block(count_run):
    inverse = build_inverse_tree(tree_from_run(count_run))
    dup = next(n for n in inverse.order if n.is_dup)
    plain = inverse.order[dup.subtree_span[1] + 1]
    assert plain.kind is EventKind.INV_LINE
    assert plain.event.seq_index == dup.event.seq_index
    # Children are the callee's states reversed: inv_return first, inv_call last.
    assert dup.children[0].kind is EventKind.INV_RETURN
    assert dup.children[-1].kind is EventKind.INV_CALL


def test_entry_point_count_scope(count_run):
    sel = select_entry_point_at(count_run.events, 2)
    assert len(sel.events) == 15
    assert sel.events[0].kind is EventKind.CALL
    assert sel.events[0].depth == 0
    assert sel.events[-1].kind is EventKind.RETURN
    assert sel.events[-1].arg == "2"
    assert [e.seq_index for e in sel.events] == list(range(15))
    validate_events(sel.events)


def test_entry_point_whole_stream_identity(count_run):
    sel = select_entry_point_at(count_run.events, 0)
    assert len(sel.events) == len(count_run.events)
    assert [e.src for e in sel.events] == [e.src for e in count_run.events]


def test_entry_point_random_rebased():
    rng = random.Random(23)
    for _ in range(50):
        run = random_run(rng, n_funcs=4, max_depth=6)
        sel = select_entry_point(run.events, rng)
        assert not sel.warning
        validate_events(sel.events)
        assert sel.events[0].depth == 0


def test_entry_point_no_call_warns():
    run = random_run(random.Random(3))
    lines_only = [
        dataclasses.replace(e, seq_index=i, kind=EventKind.LINE, arg=None, depth=0)
        for i, e in enumerate(run.events[:3])
    ]
    sel = select_entry_point(lines_only, random.Random(0))
    assert sel.warning
    assert sel.events == lines_only


def test_derive_context_full_and_truncated(count_run):
    full = derive_context(count_run.events, count_run.module_text)
    assert full == count_run.module_text  # both blocks, file order
    sel = select_entry_point_at(count_run.events, 2)
    sub = derive_context(sel.events, count_run.module_text)
    assert sub == (
        "def count(s, t):\n"
        "    n = 0\n"
        "    for c in s:\n"
        "        n += int(c == t)\n"
        "    return n\n"
    )


def test_exception_run_builds(count_run):
    rng = random.Random(29)
    for _ in range(20):
        run = random_run(rng, exception_prob=0.15)
        tree = build_forward_tree(run.events, run.exit_code)
        assert tree.total_nodes == len(run.events)

from __future__ import annotations

import random
from collections import Counter

import pytest

from dbgtrace.corpus import tree_from_run
from dbgtrace.engine import Cursor, apply
from dbgtrace.grammar import serialize
from dbgtrace.model import ActionTag, EventKind, ExitCode
from dbgtrace.policy import PolicyConfig, sample_action, sample_trajectory
from dbgtrace.tree import build_forward_tree, build_inverse_tree
from synth import random_run

STEP_ONLY = PolicyConfig(mixtures=((1.0, ((ActionTag.STEP_INTO, 1.0),)),))


def closed_form_first_action(direction: str) -> dict[str, float]:
    # Independent arithmetic over the published mixture: row 1 sums to 0.80
    # and is renormalized; inverse drops breakpoint/continue and remaps.
    if direction == "forward":
        row1 = {"step_into": 0.35, "step_over": 0.10, "step_return": 0.20,
                "breakpoint": 0.10, "continue": 0.05}
        row2 = {"step_into": 0.5, "step_over": 0.5}
    else:
        row1 = {"inv_step_into": 0.35, "inv_step_over": 0.10, "inv_step_call": 0.20}
        row2 = {"inv_step_into": 0.5, "inv_step_over": 0.5}
    out: dict[str, float] = {}
    for row in (row1, row2):
        total = sum(row.values())
        for tag, p in row.items():
            out[tag] = out.get(tag, 0.0) + 0.5 * p / total
    return out


def test_forward_closed_form_value():
    probs = closed_form_first_action("forward")
    assert probs["step_into"] == pytest.approx(0.46875)
    assert sum(probs.values()) == pytest.approx(1.0)


def test_empirical_first_action_frequencies(count_run):
    tree = tree_from_run(count_run)
    cfg = PolicyConfig()
    rng = random.Random(42)
    cursor = Cursor(tree, tree.order[0])
    n = 20000
    counts = Counter(sample_action(cfg, cursor, rng).tag.value for _ in range(n))
    expected = closed_form_first_action("forward")
    for tag, p in expected.items():
        assert counts[tag] / n == pytest.approx(p, abs=0.02)


def test_inverse_mapping_and_frequencies(count_run):
    inverse = build_inverse_tree(tree_from_run(count_run))
    cfg = PolicyConfig()
    rng = random.Random(43)
    cursor = Cursor(inverse, inverse.order[0])
    n = 20000
    counts = Counter(sample_action(cfg, cursor, rng).tag.value for _ in range(n))
    assert set(counts) <= {"inv_step_into", "inv_step_over", "inv_step_call"}
    expected = closed_form_first_action("inverse")
    for tag, p in expected.items():
        assert counts[tag] / n == pytest.approx(p, abs=0.02)


def test_dead_row_weight_renormalizes(count_run):
    # A row with no inverse-capable actions is dropped; its weight mass must
    # spread over the survivors, not lump onto the last row.
    inverse = build_inverse_tree(tree_from_run(count_run))
    cfg = PolicyConfig(
        mixtures=(
            (1 / 3, ((ActionTag.BREAKPOINT, 1.0),)),
            (1 / 3, ((ActionTag.STEP_INTO, 1.0),)),
            (1 / 3, ((ActionTag.STEP_OVER, 1.0),)),
        )
    )
    rng = random.Random(8)
    cursor = Cursor(inverse, inverse.order[0])
    n = 20000
    counts = Counter(sample_action(cfg, cursor, rng).tag.value for _ in range(n))
    assert counts["inv_step_into"] / n == pytest.approx(0.5, abs=0.02)
    assert counts["inv_step_over"] / n == pytest.approx(0.5, abs=0.02)


def test_single_mixture_always_step_into(count_run):
    tree = tree_from_run(count_run)
    rng = random.Random(0)
    for _ in range(50):
        action = sample_action(STEP_ONLY, Cursor(tree, tree.order[0]), rng)
        assert action.tag is ActionTag.STEP_INTO


def test_sampling_is_bit_reproducible(count_run):
    tree = tree_from_run(count_run)
    cfg = PolicyConfig()
    a = [sample_trajectory(tree, cfg, random.Random(7)) for _ in range(5)]
    b = [sample_trajectory(tree, cfg, random.Random(7)) for _ in range(5)]
    assert [serialize(t) for t in a] == [serialize(t) for t in b]


def test_trajectories_replay_exactly():
    rng = random.Random(71)
    cfg = PolicyConfig()
    for _ in range(40):
        run = random_run(rng, n_funcs=4, max_depth=5,
                         truncate=rng.random() < 0.2)
        fwd = build_forward_tree(run.events, run.exit_code)
        for tree in (fwd, build_inverse_tree(fwd)):
            for s in range(5):
                traj = sample_trajectory(tree, cfg, random.Random(s))
                node = tree.order[0]
                for i, step in enumerate(traj.steps):
                    result = apply(Cursor(tree, node), step.action)
                    if i + 1 < len(traj.steps):
                        assert not result.is_exit
                        node = result.node
                    else:
                        assert result.is_exit
                        assert result.exit is traj.exit


def test_breakpoint_targets_mix_hits_and_misses(count_run):
    tree = tree_from_run(count_run)
    cfg = PolicyConfig(mixtures=((1.0, ((ActionTag.BREAKPOINT, 1.0),)),),
                       breakpoint_miss_prob=0.5)
    rng = random.Random(3)
    outcomes = set()
    cursor = Cursor(tree, tree.order[0])
    for _ in range(200):
        action = sample_action(cfg, cursor, rng)
        result = apply(cursor, action)
        outcomes.add("exit" if result.is_exit else "hit")
    assert outcomes == {"exit", "hit"}


def test_budget_forces_continue_forward(count_run):
    tree = tree_from_run(count_run)
    cfg = PolicyConfig(mixtures=STEP_ONLY.mixtures, max_units=260)
    traj = sample_trajectory(tree, cfg, random.Random(0))
    assert traj.exit is tree.exit_code
    assert traj.steps[-1].action.tag is ActionTag.CONTINUE
    assert len(traj.steps) < 18


def test_budget_inverse_closes_with_step_call(count_run):
    inverse = build_inverse_tree(tree_from_run(count_run))
    cfg = PolicyConfig(mixtures=STEP_ONLY.mixtures, max_units=220)
    traj = sample_trajectory(inverse, cfg, random.Random(0))
    assert traj.exit is ExitCode.ENTRY
    assert traj.steps[-1].action.tag is ActionTag.INV_STEP_CALL
    assert len(traj.steps) < inverse.total_nodes


def test_continue_can_be_first_action(count_run):
    tree = tree_from_run(count_run)
    cfg = PolicyConfig(mixtures=((1.0, ((ActionTag.CONTINUE, 1.0),)),))
    traj = sample_trajectory(tree, cfg, random.Random(0))
    assert len(traj.steps) == 1
    assert traj.exit is ExitCode.NORMAL


def test_full_locals_at_scope_changes():
    rng = random.Random(5)
    run = random_run(rng, n_funcs=3, max_depth=4)
    tree = build_forward_tree(run.events, run.exit_code)
    cfg = PolicyConfig()
    for s in range(20):
        traj = sample_trajectory(tree, cfg, random.Random(s))
        prev_state = None
        prev_action = None
        for step in traj.steps:
            state = step.state
            if state.kind is EventKind.LINE:
                expect_full = (
                    prev_state is None
                    or prev_state.kind is EventKind.RETURN
                    or (prev_action is not None
                        and prev_action.tag is ActionTag.BREAKPOINT)
                )
                if expect_full:
                    assert state.view.full or not state.view.elided
            prev_state, prev_action = state, step.action


def test_policy_config_round_trip_file(tmp_path):
    cfg = PolicyConfig(breakpoint_miss_prob=0.1, seed=9, max_units=512)
    path = tmp_path / "policy.json"
    path.write_text(__import__("json").dumps(cfg.to_dict()))
    loaded = PolicyConfig.from_file(str(path))
    assert loaded == cfg


def test_mixture_validation():
    with pytest.raises(ValueError):
        PolicyConfig(mixtures=())
    with pytest.raises(ValueError):
        PolicyConfig(mixtures=((1.0, ((ActionTag.INV_STEP_INTO, 1.0),)),))
    with pytest.raises(ValueError):
        PolicyConfig(breakpoint_target_rule="nope")
    with pytest.raises(ValueError):
        PolicyConfig(mixtures=((1.0, ((ActionTag.STEP_INTO, -0.5),)),))
    with pytest.raises(ValueError):
        PolicyConfig(mixtures=((0.0, ((ActionTag.STEP_INTO, 1.0),)),))
    with pytest.raises(ValueError):
        PolicyConfig(breakpoint_miss_prob=1.5)

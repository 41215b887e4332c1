"""Sample trajectories under the stochastic action policy and round-trip
them through the formal grammar.

The default policy mixes two categoricals with equal weight: one over all
five actions and one over step_into/step_over only; every serialized trace
parses back field-identically.
"""

import random
from collections import Counter

from dbgtrace import corpus
from dbgtrace.grammar import measure, parse, serialize
from dbgtrace.policy import PolicyConfig, sample_trajectory
from dbgtrace.tree import build_inverse_tree

run = corpus.load_trace_run(
    corpus.fixture_path("count_events.jsonl"),
    corpus.fixture_path("count_module.py"),
)
tree = corpus.tree_from_run(run)
cfg = PolicyConfig()

print("three policy-sampled trajectories (seed shown):")
for seed in (1, 2, 3):
    traj = sample_trajectory(tree, cfg, random.Random(seed))
    actions = " ".join(s.action.tag.value for s in traj.steps)
    print(f"  seed {seed}: {len(traj.steps)} states, exit {traj.exit.value}: {actions}")

print("\nround-trip check over 500 samples on forward and inverse trees:")
inverse = build_inverse_tree(tree)
totals = Counter()
for seed in range(500):
    for t in (tree, inverse):
        traj = sample_trajectory(t, cfg, random.Random(seed))
        text = serialize(traj)
        assert parse(text).trajectory == traj
        totals.update(measure(traj).action_counts)
print("  all equal after parse(serialize(t))")
print(f"  pooled action counts: {dict(sorted(totals.items()))}")

print("\none serialized trace, verbatim:")
print(serialize(sample_trajectory(tree, cfg, random.Random(5))))

"""Corpus statistics: sample two corpora with different code-context sizes
and aggregate their measures.

Action-count means track the shared policy; token-proxy means track the
corpus (longer contexts dominate), mirroring how function-level and
repository-level corpora differ.
"""

import random

from dbgtrace import corpus
from dbgtrace.grammar import measure
from dbgtrace.policy import PolicyConfig, sample_trajectory
from dbgtrace.stats import MeasureRecord, aggregate
from dbgtrace.tree import build_forward_tree

run = corpus.load_trace_run(
    corpus.fixture_path("count_events.jsonl"),
    corpus.fixture_path("count_module.py"),
)
cfg = PolicyConfig()

records = []
for group, scale in (("small-context", 1), ("large-context", 12)):
    tree = build_forward_tree(
        run.events, run.exit_code,
        code_context=run.module_text * scale,  # stand-in for a bigger repo
    )
    for i in range(300):
        traj = sample_trajectory(tree, cfg, random.Random(i))
        records.append(
            MeasureRecord(record_id=f"{group}-{i}", group=group,
                          direction=traj.direction, measure=measure(traj))
        )

summary = aggregate(records)
for group, payload in summary["groups"].items():
    metrics = payload["metrics"]
    print(f"{group} (n={payload['count']}):")
    for name in ("token_proxy", "n_actions", "act_step_into", "evt_line"):
        row = metrics[name]
        print(f"  {name:<14} mean={row['mean']:8.1f} p25={row['p25']:6.0f} "
              f"p90={row['p90']:6.0f}")
    hist = payload["histograms"]["token_proxy"]
    print(f"  token_proxy histogram counts: {hist['counts']}")

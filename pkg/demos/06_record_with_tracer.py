"""Record a fresh trace with the linetracer package and feed it straight
into the pipeline (requires `pip install -e ./tracer`).

The recorder emits the same frame-event JSONL wire format the pipeline
consumes, so everything composes: trace -> tree -> sample -> encode.
"""

import random
import tempfile

from linetracer.recorder import TraceRecordingConfig, trace_program, events_jsonl

from dbgtrace import corpus
from dbgtrace.grammar import serialize
from dbgtrace.policy import PolicyConfig, sample_trajectory

source = """\
def fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a

def main():
    return fib(6)
"""

with tempfile.NamedTemporaryFile("w", suffix=".py", delete=False) as fh:
    fh.write(source)
    path = fh.name

result = trace_program(TraceRecordingConfig(path=path, func="main"))
print(f"recorded {len(result.events)} events, exit {result.exit}")

events, exit_code = corpus.parse_events_jsonl(events_jsonl(result))
tree = corpus.tree_from_run(
    corpus.TraceRun(events=events, exit_code=exit_code,
                    module_text=result.code_context)
)
traj = sample_trajectory(tree, PolicyConfig(), random.Random(0))
print(f"sampled {len(traj.steps)} states; serialized trace below\n")
print(serialize(traj))

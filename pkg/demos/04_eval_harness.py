"""Build input/output prediction prompts and score predictions.

The output task jumps from the call of f() to its return (step_return) or
to the executed return line (breakpoint, which reveals the full locals);
the input task runs the inverse trace and predicts the call arguments. The
horizon sweep reveals intermediate states before the jump: fraction 1.0 is
full input/output prediction, 0.0 is single-step prediction.
"""

from dbgtrace import corpus
from dbgtrace.evaluation import (
    build_cruxeval_input_prompt,
    build_cruxeval_output_prompt,
    build_horizon_sweep,
    score,
)
from dbgtrace.model import ActionTag

run = corpus.load_trace_run(
    corpus.fixture_path("crux_events.jsonl"),
    corpus.fixture_path("crux_module.py"),
)

for case in (
    build_cruxeval_output_prompt(run, ActionTag.STEP_RETURN),
    build_cruxeval_output_prompt(run, ActionTag.BREAKPOINT),
    build_cruxeval_input_prompt(run),
):
    print(f"== {case.case_id} ==")
    print(case.prompt)
    print("---- end of prompt; target ----")
    print(case.target)
    perfect = score(case, case.target)
    corrupted = score(case, case.target.replace("5", "6", 1))
    print(f"oracle prediction: em={perfect.em}; corrupted: em={corrupted.em}\n")

print("horizon sweep (step_return, step counts 0/4/8/12/16/32):")
for case in build_horizon_sweep(run, ActionTag.STEP_RETURN, [0, 4, 8, 12, 16, 32]):
    revealed = case.prompt.count("<|frame_sep|>") - 1
    print(f"  {case.case_id:<36} fraction={case.horizon_fraction:4.2f} "
          f"revealed_states={revealed} clamped={case.clamped}")

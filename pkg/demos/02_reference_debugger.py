"""Drive the deterministic reference debugger over the count() trace.

Step actions move to adjacent tree nodes; jump actions (step_return,
breakpoint, continue) can skip many states at once. A breakpoint on a line
that never executes again falls through to the exit code.
"""

from dbgtrace import corpus
from dbgtrace.engine import Cursor, apply
from dbgtrace.model import ActionTag, DebuggerAction
from dbgtrace.policy import emit_state
from dbgtrace.grammar import render_state, render_exit

run = corpus.load_trace_run(
    corpus.fixture_path("count_events.jsonl"),
    corpus.fixture_path("count_module.py"),
)
tree = corpus.tree_from_run(run)

script = [
    DebuggerAction(ActionTag.STEP_INTO),   # -> call main
    DebuggerAction(ActionTag.STEP_INTO),   # -> the calling line
    DebuggerAction(ActionTag.STEP_INTO),   # -> call count (descends)
    DebuggerAction(ActionTag.BREAKPOINT, src_target="    for c in s:"),
    DebuggerAction(ActionTag.BREAKPOINT, src_target="    for c in s:"),  # next iteration
    DebuggerAction(ActionTag.STEP_RETURN),  # -> count's return, arg "2"
    DebuggerAction(ActionTag.STEP_OVER),    # -> main's return (one level up)
    DebuggerAction(ActionTag.CONTINUE),     # -> exit
]

cursor = Cursor.entry(tree)
prev = None
for action in script:
    label = action.tag.value
    if action.src_target is not None:
        label += f" {action.src_target!r}"
    result = apply(cursor, action)
    if result.is_exit:
        print(f"{label:<34} => {render_exit(result.exit)}")
        break
    state = emit_state(result.node, prev,
                       via_breakpoint=action.tag is ActionTag.BREAKPOINT)
    print(f"{label:<34} => {render_state(state)}")
    prev = result.node
    cursor = Cursor(tree, result.node)

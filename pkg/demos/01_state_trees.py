"""Build forward and inverse state trees from a recorded trace.

The bundled fixture is a trace of main() calling count("berry", "r"):
18 frame events. The states of the count() invocation hang off the line
node that performed the call, so tree depth mirrors the call stack.
"""

from dbgtrace import corpus
from dbgtrace.tree import build_inverse_tree, select_entry_point_at

run = corpus.load_trace_run(
    corpus.fixture_path("count_events.jsonl"),
    corpus.fixture_path("count_module.py"),
)
tree = corpus.tree_from_run(run)

print(f"forward tree: {tree.total_nodes} nodes, exit {tree.exit_code.value}")


def show(nodes, indent=0):
    for node in nodes:
        ev = node.event
        payload = ev.arg if ev.arg is not None else dict(ev.locals)
        print(f"{'    ' * indent}[{ev.seq_index:2d}] {ev.kind.value:<9} {ev.src!r:<38} {payload}")
        show(node.children, indent + 1)


show(tree.roots)

print("\nentry-point truncation to the count() call (seq 2):")
selection = select_entry_point_at(run.events, 2)
scope = corpus.tree_from_run(
    corpus.TraceRun(events=selection.events, exit_code=run.exit_code,
                    module_text=run.module_text)
)
print(f"  {scope.total_nodes} events re-based to depth 0; context is count() only:")
print("  " + scope.code_context.replace("\n", "\n  ").rstrip())

inverse = build_inverse_tree(scope)
print(f"\ninverse tree: {inverse.total_nodes} nodes "
      f"({inverse.call_dup_count} duplicated calling lines)")
show(inverse.roots)

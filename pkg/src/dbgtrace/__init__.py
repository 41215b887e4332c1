"""dbgtrace: turn recorded execution traces into debugger trajectories.

The pipeline reconstructs call-stack state trees from frame-event streams,
derives inverse trees, drives a deterministic reference debugger over them,
samples trajectories under a stochastic action policy, serializes them into
a formal special-token grammar (with a round-trip parser), and builds
exact-match evaluation sets for next-state and input/output prediction.
"""

__version__ = "0.1.0"

from .model import (
    ActionTag,
    DebuggerAction,
    EmittedState,
    EventKind,
    ExitCode,
    FrameEvent,
    LocalsView,
    MalformedTraceError,
    Step,
    Trajectory,
    diff_locals,
    full_locals,
)
from .tree import (
    EntrySelection,
    StateNode,
    StateTree,
    build_forward_tree,
    build_inverse_tree,
    select_entry_point,
    select_entry_point_at,
    validate_events,
)
from .engine import (
    Cursor,
    CursorAtExit,
    DirectionError,
    TransitionResult,
    apply,
    replay,
)
from .policy import PolicyConfig, emit_state, sample_action, sample_trajectory
from .grammar import (
    GrammarError,
    Measure,
    ParseResult,
    SPECIAL_TOKENS,
    measure,
    parse,
    parse_state_fragment,
    serialize,
    serialize_prefix,
    vocabulary_hash,
)
from .corpus import (
    TraceRun,
    derive_context,
    fixture_path,
    load_trace_run,
    parse_events_jsonl,
    tree_from_json,
    tree_from_run,
    tree_to_json,
    trajectory_from_record,
    trajectory_to_record,
)
from .evaluation import (
    PromptCase,
    ScoreRecord,
    build_action_eval_set,
    build_cruxeval_input_prompt,
    build_cruxeval_output_prompt,
    build_horizon_sweep,
    score,
    score_at_k,
)
from .stats import Aggregator, MeasureRecord, aggregate

__all__ = [name for name in dir() if not name.startswith("_")]

"""linetracer: frame-event recording and sandboxed assertion checks."""

__version__ = "0.1.0"

from .checker import CheckResult, exec_check
from .recorder import (
    DEFAULT_MAX_EVENTS,
    TraceRecordingConfig,
    TraceResult,
    events_jsonl,
    safe_repr,
    trace_program,
)

__all__ = [
    "CheckResult",
    "DEFAULT_MAX_EVENTS",
    "TraceRecordingConfig",
    "TraceResult",
    "events_jsonl",
    "exec_check",
    "safe_repr",
    "trace_program",
]

from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dbgtrace import corpus

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def load_golden(name: str) -> str:
    """Golden bytes; files carry one POSIX trailing newline that is not part
    of the canonical text."""

    with open(os.path.join(GOLDEN_DIR, name), "r", encoding="utf-8") as fh:
        text = fh.read()
    return text[:-1] if text.endswith("\n") else text


@pytest.fixture(scope="session")
def count_run() -> corpus.TraceRun:
    return corpus.load_trace_run(
        corpus.fixture_path("count_events.jsonl"),
        corpus.fixture_path("count_module.py"),
    )


@pytest.fixture(scope="session")
def crux_run() -> corpus.TraceRun:
    return corpus.load_trace_run(
        corpus.fixture_path("crux_events.jsonl"),
        corpus.fixture_path("crux_module.py"),
    )

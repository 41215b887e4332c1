from __future__ import annotations

import json

import pytest

from conftest import load_golden
from dbgtrace import corpus
from dbgtrace.cli import main
from dbgtrace.grammar import vocabulary_hash

EVENTS = corpus.fixture_path("count_events.jsonl")
CTX = corpus.fixture_path("count_module.py")
CRUX_EVENTS = corpus.fixture_path("crux_events.jsonl")
CRUX_CTX = corpus.fixture_path("crux_module.py")


def run(*argv) -> int:
    return main([str(a) for a in argv])


def read_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def test_version_prints_grammar_hash(capsys):
    with pytest.raises(SystemExit):
        run("--version")
    out = capsys.readouterr().out
    assert "dbgtrace" in out and vocabulary_hash() in out


def test_pipeline_composition(tmp_path):
    tree = tmp_path / "tree.json"
    traj = tmp_path / "traj.jsonl"
    enc = tmp_path / "corpus.jsonl"
    dec = tmp_path / "decoded.jsonl"
    summary = tmp_path / "summary.json"
    assert run("build-tree", "--events", EVENTS, "--ctx", CTX, "--out", tree) == 0
    assert run("sample", "--tree", tree, "--policy", "table-a1", "--seed", 7,
               "--count", 25, "--out", traj) == 0
    assert run("encode", "--in", traj, "--jobs", 2, "--out", enc) == 0
    assert run("decode", "--in", enc, "--jobs", 2, "--out", dec) == 0
    assert run("stats", "--in", dec, "--out", summary,
               "--measures-csv", tmp_path / "m.csv",
               "--summary-csv", tmp_path / "s.csv") == 0
    decoded = read_lines(dec)
    original = read_lines(traj)
    for a, b in zip(original, decoded):
        a.pop("group", None)
        assert a == b
    data = json.loads(summary.read_text())
    assert data["groups"]["all"]["count"] == 25
    # The measures CSV round-trips as a stats input with an identical summary.
    summary2 = tmp_path / "summary2.json"
    assert run("stats", "--in", tmp_path / "m.csv", "--out", summary2) == 0
    assert json.loads(summary2.read_text()) == data
    assert (tmp_path / "s.csv").read_text().startswith("group,metric,mean,p25,p90")


def test_sample_is_deterministic(tmp_path):
    tree = tmp_path / "tree.json"
    run("build-tree", "--events", EVENTS, "--ctx", CTX, "--out", tree)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run("sample", "--tree", tree, "--policy", "table-a1", "--seed", 7,
        "--count", 100, "--out", a)
    run("sample", "--tree", tree, "--policy", "table-a1", "--seed", 7,
        "--count", 100, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    # Parallel workers preserve record order and bytes.
    c = tmp_path / "c.jsonl"
    run("sample", "--tree", tree, "--policy", "table-a1", "--seed", 7,
        "--count", 100, "--jobs", 3, "--out", c)
    assert a.read_bytes() == c.read_bytes()


def test_golden_fixtures_via_cli(tmp_path):
    tree = tmp_path / "tree.json"
    itree = tmp_path / "itree.json"
    fwd = tmp_path / "fwd.jsonl"
    inv = tmp_path / "inv.jsonl"
    enc_f = tmp_path / "fwd_enc.jsonl"
    enc_i = tmp_path / "inv_enc.jsonl"
    run("build-tree", "--events", EVENTS, "--ctx", CTX, "--out", tree)
    run("sample", "--tree", tree, "--policy", "step-into-only", "--seed", 0,
        "--count", 1, "--out", fwd)
    run("encode", "--in", fwd, "--out", enc_f)
    assert read_lines(enc_f)[0]["text"] == load_golden("count_forward.txt")
    run("build-tree", "--events", EVENTS, "--ctx", CTX, "--entry-call", 2,
        "--out", tree)
    run("invert", "--tree", tree, "--out", itree)
    run("sample", "--tree", itree, "--policy", "step-into-only", "--seed", 0,
        "--count", 1, "--out", inv)
    run("encode", "--in", inv, "--out", enc_i)
    assert read_lines(enc_i)[0]["text"] == load_golden("count_inverse.txt")


def test_eval_build_and_score_ceiling(tmp_path):
    tree = tmp_path / "tree.json"
    traj = tmp_path / "traj.jsonl"
    prompts = tmp_path / "prompts.jsonl"
    preds = tmp_path / "preds.jsonl"
    scores = tmp_path / "scores.csv"
    run("build-tree", "--events", EVENTS, "--ctx", CTX, "--out", tree)
    run("sample", "--tree", tree, "--policy", "table-a1", "--seed", 3,
        "--count", 50, "--out", traj)
    assert run("eval-build", "--corpus", traj, "--action", "step_into",
               "--n", 10, "--seed", 1, "--jobs", 2, "--out", prompts) == 0
    cases = read_lines(prompts)
    assert len(cases) == 10
    corpus.write_jsonl(
        str(preds), [{"id": c["id"], "completions": [c["target"]]} for c in cases]
    )
    assert run("eval-score", "--prompts", prompts, "--predictions", preds,
               "--k", 1, "--out", scores) == 0
    rows = scores.read_text().strip().splitlines()
    assert rows[0] == "id,em,em_locals,em_arg,em_src,em_evt,pass,k"
    for row in rows[1:]:
        assert row.split(",")[1] == "1"
    # Parallel scoring preserves row order and bytes.
    scores2 = tmp_path / "scores2.csv"
    assert run("eval-score", "--prompts", prompts, "--predictions", preds,
               "--k", 1, "--jobs", 3, "--out", scores2) == 0
    assert scores2.read_bytes() == scores.read_bytes()


def test_crux_build_cli(tmp_path):
    out = tmp_path / "crux.jsonl"
    assert run("crux-build", "--events", CRUX_EVENTS, "--ctx", CRUX_CTX,
               "--variant", "breakpoint", "--out", out) == 0
    case = read_lines(out)[0]
    assert case["prompt"] == load_golden("crux_output_breakpoint_prompt.txt")
    assert run("crux-build", "--events", CRUX_EVENTS, "--ctx", CRUX_CTX,
               "--variant", "inv_step_call", "--out", out) == 0
    case = read_lines(out)[0]
    assert case["target"] == load_golden("crux_input_target.txt")
    assert run("crux-build", "--events", CRUX_EVENTS, "--ctx", CRUX_CTX,
               "--variant", "step_return", "--horizons", "0,2,4",
               "--out", out) == 0
    assert len(read_lines(out)) == 3


def test_oracle_repl(tmp_path, capsys, monkeypatch):
    import io

    tree = tmp_path / "tree.json"
    run("build-tree", "--events", EVENTS, "--ctx", CTX, "--out", tree)
    capsys.readouterr()
    monkeypatch.setattr(
        "sys.stdin",
        io.StringIO(
            "step_into\nstep_into\nstep_return\ncontinue\n"
            "step_into\nbreakpoint     return n\nbogus\nquit\n"
        ),
    )
    assert run("oracle", "--tree", tree) == 0
    out = capsys.readouterr().out
    assert "<|call_sep|><|src_sep|>def main():" in out
    assert '<|return_sep|><|src_sep|>    return count("berry", "r")<|arg_sep|>"2"' in out
    assert "<|exit_normal|>" in out
    # Breakpoint landings show full locals; unknown commands are reported.
    assert ('<|line_sep|><|arg_sep|>{"s": "\'berry\'", "t": "\'r\'", "n": "2", '
            '"c": "\'y\'"}<|src_sep|>    return n') in out
    assert "? unknown action" in out


def test_errors_leave_no_partial_output(tmp_path, capsys):
    out = tmp_path / "tree.json"
    assert run("build-tree", "--events", "/nonexistent.jsonl", "--out", out) == 1
    assert not out.exists()
    assert "error:" in capsys.readouterr().err

"""Command-line front end for the trajectory pipeline.

Subcommands cover the pipeline end to end: build-tree, invert, sample,
encode, decode, stats, eval-build, eval-score, crux-build, and an
interactive oracle REPL. Sampling subcommands require an explicit seed and
are byte-deterministic given their flags; record-parallel subcommands keep
output order equal to input order regardless of --jobs.
"""

from __future__ import annotations

import argparse
import functools
import json
import multiprocessing
import os
import random
import shlex
import subprocess
import sys
import tempfile

from . import __version__, corpus, evaluation, grammar, stats
from .engine import Cursor, apply
from .model import ActionTag, DebuggerAction
from .policy import PolicyConfig, sample_trajectory
from .tree import build_inverse_tree, select_entry_point, select_entry_point_at


class CliError(Exception):
    pass


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-dbgtrace-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonl(records) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def _load_policy(spec: str) -> PolicyConfig:
    if spec == "table-a1":
        return PolicyConfig.table_default()
    if spec == "step-into-only":
        return PolicyConfig(mixtures=((1.0, ((ActionTag.STEP_INTO, 1.0),)),))
    return PolicyConfig.from_file(spec)


def cmd_build_tree(args) -> int:
    run = corpus.load_trace_run(args.events, args.ctx)
    events = run.events
    if args.entry_call is not None:
        events = select_entry_point_at(events, args.entry_call).events
    elif args.entry_seed is not None:
        selection = select_entry_point(events, random.Random(args.entry_seed))
        if selection.warning:
            print("warning: no call event; stream left untruncated", file=sys.stderr)
        events = selection.events
    tree = corpus.tree_from_run(
        corpus.TraceRun(events=events, exit_code=run.exit_code, module_text=run.module_text)
    )
    _atomic_write(args.out, json.dumps(corpus.tree_to_json(tree), ensure_ascii=False) + "\n")
    print(f"wrote {args.out}: {tree.total_nodes} nodes, exit {tree.exit_code.value}")
    return 0


def cmd_invert(args) -> int:
    with open(args.tree, "r", encoding="utf-8") as fh:
        tree = corpus.tree_from_json(json.load(fh))
    if tree.direction != "forward":
        raise CliError("invert expects a forward tree dump")
    inverse = build_inverse_tree(tree)
    _atomic_write(args.out, json.dumps(corpus.tree_to_json(inverse), ensure_ascii=False) + "\n")
    print(
        f"wrote {args.out}: {inverse.total_nodes} nodes "
        f"({inverse.call_dup_count} duplicated calling lines)"
    )
    return 0


_WORKER_STATE: dict = {}


def _init_sample_worker(tree_json: dict, policy_dict: dict) -> None:
    _WORKER_STATE["tree"] = corpus.tree_from_json(tree_json)
    _WORKER_STATE["policy"] = PolicyConfig.from_dict(policy_dict)


def _sample_one(task: tuple[int, int]) -> dict:
    index, seed = task
    trajectory = sample_trajectory(
        _WORKER_STATE["tree"], _WORKER_STATE["policy"], random.Random(seed)
    )
    return corpus.trajectory_to_record(trajectory, id=index, group=_WORKER_STATE.get("group"))


def cmd_sample(args) -> int:
    with open(args.tree, "r", encoding="utf-8") as fh:
        tree_json = json.load(fh)
    policy = _load_policy(args.policy)
    if args.max_units is not None:
        policy = PolicyConfig.from_dict({**policy.to_dict(), "max_units": args.max_units})
    tasks = [(i, args.seed + i) for i in range(args.count)]
    policy_dict = policy.to_dict()
    if args.jobs > 1:
        with multiprocessing.Pool(
            args.jobs, initializer=_init_sample_worker, initargs=(tree_json, policy_dict)
        ) as pool:
            records = list(pool.imap(_sample_one, tasks, chunksize=16))
    else:
        _init_sample_worker(tree_json, policy_dict)
        records = [_sample_one(t) for t in tasks]
    if args.group:
        for rec in records:
            rec["group"] = args.group
    else:
        for rec in records:
            rec.pop("group", None)
    _atomic_write(args.out, _jsonl(records))
    print(f"wrote {args.out}: {len(records)} trajectories (seed {args.seed})")
    return 0


def _encode_one(rec: dict) -> dict:
    trajectory = corpus.trajectory_from_record(rec)
    out = {"id": rec.get("id"), "direction": trajectory.direction,
           "text": grammar.serialize(trajectory)}
    if rec.get("group") is not None:
        out["group"] = rec["group"]
    return out


def _decode_one(rec: dict) -> dict:
    result = grammar.parse(rec["text"])
    if result.truncated:
        raise CliError(f"record {rec.get('id')}: truncated trace in corpus")
    out = corpus.trajectory_to_record(result.trajectory, id=rec.get("id"))
    if rec.get("group") is not None:
        out["group"] = rec["group"]
    return out


def _map_records(fn, records, jobs: int) -> list[dict]:
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            return list(pool.imap(fn, records, chunksize=64))
    return [fn(r) for r in records]


def cmd_encode(args) -> int:
    records = corpus.read_jsonl(args.infile)
    out = _map_records(_encode_one, records, args.jobs)
    _atomic_write(args.out, _jsonl(out))
    print(f"wrote {args.out}: {len(out)} encoded traces")
    return 0


def cmd_decode(args) -> int:
    records = corpus.read_jsonl(args.infile)
    out = _map_records(_decode_one, records, args.jobs)
    _atomic_write(args.out, _jsonl(out))
    print(f"wrote {args.out}: {len(out)} decoded trajectories")
    return 0


def _measure_record(rec: dict, group_key: str = "group") -> stats.MeasureRecord:
    if "text" in rec:
        trajectory = grammar.parse(rec["text"]).trajectory
    else:
        trajectory = corpus.trajectory_from_record(rec)
    return stats.MeasureRecord(
        record_id=str(rec.get("id", "")),
        group=str(rec.get(group_key) or "all"),
        direction=trajectory.direction,
        measure=grammar.measure(trajectory),
    )


def cmd_stats(args) -> int:
    if args.infile.endswith(".csv"):
        with open(args.infile, "r", encoding="utf-8") as fh:
            measures = stats.measure_records_from_csv(fh.read())
    else:
        records = corpus.read_jsonl(args.infile)
        measures = _map_records(
            functools.partial(_measure_record, group_key=args.group_key),
            records,
            args.jobs,
        )
    if not measures:
        raise CliError("empty corpus")
    summary = stats.aggregate(measures)
    _atomic_write(args.out, json.dumps(summary, indent=2) + "\n")
    if args.measures_csv:
        _atomic_write(args.measures_csv, stats.measure_csv_text(measures))
    if args.summary_csv:
        _atomic_write(args.summary_csv, stats.summary_csv_text(summary))
    if args.hist_out:
        _atomic_write(args.hist_out, stats.histogram_dump(summary) + "\n")
    print(f"wrote {args.out}: {len(measures)} trajectories in "
          f"{len(summary['groups'])} group(s)")
    return 0


def _parse_corpus_record(rec: dict):
    if "text" in rec:
        return grammar.parse(rec["text"]).trajectory
    return corpus.trajectory_from_record(rec)


def cmd_eval_build(args) -> int:
    records = corpus.read_jsonl(args.corpus)
    trajectories = _map_records(_parse_corpus_record, records, args.jobs)
    cases = evaluation.build_action_eval_set(
        trajectories, ActionTag(args.action), args.n, random.Random(args.seed)
    )
    _atomic_write(args.out, _jsonl(evaluation.case_to_record(c) for c in cases))
    print(f"wrote {args.out}: {len(cases)} prompt cases for {args.action}")
    return 0


class _ExecCheckCommand:
    """Re-execution checker backed by a subprocess command (picklable so
    scoring can fan out across worker processes)."""

    def __init__(self, command: str) -> None:
        self.argv_base = shlex.split(command)

    def __call__(self, fn_src: str, args_reprs, expected: str) -> bool:
        with tempfile.NamedTemporaryFile(
            "w", suffix=".py", delete=False, encoding="utf-8"
        ) as fh:
            fh.write(fn_src)
            path = fh.name
        try:
            argv = self.argv_base + ["--fn-src", path, "--expect", expected]
            for item in args_reprs:
                argv += ["--input", item]
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode not in (0, 1):
                return False
            try:
                return bool(json.loads(proc.stdout.strip() or "{}").get("ok"))
            except json.JSONDecodeError:
                return False
        finally:
            os.unlink(path)


def _score_case(task, k: int, checker) -> list[str]:
    case_rec, completions = task
    case = evaluation.case_from_record(case_rec)
    if len(completions) < k:
        completions = list(completions) + [""] * (k - len(completions))
    record = evaluation.score_at_k(case, completions, k, exec_checker=checker)

    def flag(v) -> str:
        return "NA" if v is None else ("1" if v else "0")

    return [
        str(case.case_id),
        flag(record.em),
        flag(record.em_locals),
        flag(record.em_arg),
        flag(record.em_src),
        flag(record.em_evt),
        flag(record.passed),
        str(k),
    ]


def cmd_eval_score(args) -> int:
    case_records = corpus.read_jsonl(args.prompts)
    predictions = {rec["id"]: rec["completions"]
                   for rec in corpus.read_jsonl(args.predictions)}
    checker = _ExecCheckCommand(args.check_cmd) if args.check_cmd else None
    tasks = [(rec, predictions.get(rec["id"], [])) for rec in case_records]
    scorer = functools.partial(_score_case, k=args.k, checker=checker)
    rows = [["id", "em", "em_locals", "em_arg", "em_src", "em_evt", "pass", "k"]]
    rows += _map_records(scorer, tasks, args.jobs)
    _atomic_write(args.out, "\n".join(",".join(r) for r in rows) + "\n")
    print(f"wrote {args.out}: {len(rows) - 1} scored cases")
    return 0


def cmd_crux_build(args) -> int:
    run = corpus.load_trace_run(args.events, args.ctx)
    variant = ActionTag(args.variant)
    if args.horizons:
        step_counts = [int(s) for s in args.horizons.split(",")]
        cases = evaluation.build_horizon_sweep(run, variant, step_counts)
    elif variant is ActionTag.INV_STEP_CALL:
        cases = [evaluation.build_cruxeval_input_prompt(run)]
    else:
        cases = [evaluation.build_cruxeval_output_prompt(run, variant)]
    _atomic_write(args.out, _jsonl(evaluation.case_to_record(c) for c in cases))
    print(f"wrote {args.out}: {len(cases)} prompt case(s)")
    return 0


def cmd_oracle(args) -> int:
    with open(args.tree, "r", encoding="utf-8") as fh:
        tree = corpus.tree_from_json(json.load(fh))
    cursor = Cursor.entry(tree)
    print(f"# oracle on a {tree.direction} tree with {tree.total_nodes} nodes; "
          "actions: step_into step_over step_return breakpoint <SRC> continue "
          "(inv_* on inverse trees); quit to exit")
    for line in sys.stdin:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if line.strip() in ("quit", "exit"):
            break
        if line.startswith("breakpoint "):
            action = DebuggerAction(ActionTag.BREAKPOINT, src_target=line[len("breakpoint "):])
        else:
            try:
                action = DebuggerAction(ActionTag(line.strip()))
            except ValueError:
                print(f"? unknown action {line.strip()!r}")
                continue
        try:
            result = apply(cursor, action)
        except ValueError as exc:
            print(f"? {exc}")
            continue
        if result.is_exit:
            print(grammar.render_exit(result.exit))
            cursor = Cursor.entry(tree)
            print("# trajectory exited; cursor reset to entry")
        else:
            node = result.node
            from .policy import emit_state

            prev = None if cursor.at_entry else cursor.node
            state = emit_state(node, prev, via_breakpoint=action.tag is ActionTag.BREAKPOINT)
            print(grammar.render_state(state))
            cursor = Cursor(tree=tree, node=node)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbgtrace",
        description="Debugger-trajectory data pipeline and evaluation harness.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"dbgtrace {__version__} grammar:{grammar.vocabulary_hash()}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-tree", help="frame-event JSONL -> forward tree dump")
    p.add_argument("--events", required=True)
    p.add_argument("--ctx", help="code-context sidecar (module source)")
    p.add_argument("--out", required=True)
    p.add_argument("--entry-seed", type=int, help="seeded uniform entry-point truncation")
    p.add_argument("--entry-call", type=int, help="truncate to the call event with this seq")
    p.set_defaults(func=cmd_build_tree)

    p = sub.add_parser("invert", help="forward tree dump -> inverse tree dump")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("sample", help="tree dump -> trajectory corpus")
    p.add_argument("--tree", required=True)
    p.add_argument("--policy", default="table-a1",
                   help="'table-a1', 'step-into-only', or a JSON config path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--group", help="group label stamped on every record")
    p.add_argument("--max-units", type=int, help="override the emitted-size budget")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("encode", help="trajectory records -> grammar text corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="grammar text corpus -> trajectory records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("stats", help="corpus (or measures CSV) -> summary statistics")
    p.add_argument("--in", dest="infile", required=True,
                   help="corpus JSONL, or a previously dumped measures .csv")
    p.add_argument("--out", required=True)
    p.add_argument("--group-key", default="group",
                   help="corpus-record field to group by (default: group)")
    p.add_argument("--measures-csv", help="also dump one measure row per trajectory")
    p.add_argument("--summary-csv", help="also dump a flat group/metric summary table")
    p.add_argument("--hist-out", help="gnuplot-compatible histogram dump")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval-build", help="corpus + action -> prompt set")
    p.add_argument("--corpus", required=True)
    p.add_argument("--action", required=True, choices=[t.value for t in ActionTag])
    p.add_argument("--n", type=int, default=800)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_build)

    p = sub.add_parser("eval-score", help="prompt set + predictions -> score CSV")
    p.add_argument("--prompts", required=True)
    p.add_argument("--predictions", required=True,
                   help="JSONL of {id, completions: [text, ...]}")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--check-cmd",
                   help="command prefix for re-execution checks, e.g. 'linetracer check'")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_score)

    p = sub.add_parser("crux-build", help="wrapper trace -> input/output prompt set")
    p.add_argument("--events", required=True)
    p.add_argument("--ctx", required=True)
    p.add_argument("--variant", required=True,
                   choices=["step_return", "breakpoint", "inv_step_call"])
    p.add_argument("--horizons", help="comma-separated step counts for a horizon sweep")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_crux_build)

    p = sub.add_parser("oracle", help="interactive reference-debugger REPL on a tree dump")
    p.add_argument("--tree", required=True)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

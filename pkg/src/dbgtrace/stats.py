"""Corpus-level statistics over per-trajectory measures.

Streaming aggregation with mergeable partials: per group, means plus
nearest-rank 25th/90th percentiles for the token proxy, action/event counts
and code length, with log-spaced histograms for token counts and linear
histograms for action counts. Bin edges are part of the output so dumps are
reproducible.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .grammar import Measure

TOKEN_HIST_BINS = 10
ACTION_HIST_BINS = 10


@dataclass
class MeasureRecord:
    """One row of the measures table: id, grouping key, and the counts."""

    record_id: str
    group: str
    direction: str
    measure: Measure

    def metrics(self) -> dict[str, float]:
        m = self.measure
        out = {
            "token_proxy": m.token_proxy,
            "special_tokens": m.special_tokens,
            "payload_chars": m.payload_chars,
            "context_chars": m.context_chars,
            "n_states": m.n_states,
            "n_actions": sum(m.action_counts.values()),
        }
        for tag, count in m.action_counts.items():
            out[f"act_{tag}"] = count
        for kind, count in m.event_counts.items():
            out[f"evt_{kind}"] = count
        return out


def measure_csv_header(records: list[MeasureRecord]) -> list[str]:
    keys: set[str] = set()
    for rec in records:
        keys.update(rec.metrics())
    fixed = ["token_proxy", "special_tokens", "payload_chars", "context_chars",
             "n_states", "n_actions"]
    dynamic = sorted(k for k in keys if k not in fixed)
    return ["id", "group", "direction"] + fixed + dynamic


def measure_csv_rows(records: list[MeasureRecord]) -> list[list[str]]:
    header = measure_csv_header(records)
    rows = []
    for rec in records:
        metrics = rec.metrics()
        row = [rec.record_id, rec.group, rec.direction]
        row += [str(metrics.get(k, 0)) for k in header[3:]]
        rows.append(row)
    return rows


def measure_csv_text(records: list[MeasureRecord]) -> str:
    rows = [measure_csv_header(records)] + measure_csv_rows(records)
    return "\n".join(",".join(r) for r in rows) + "\n"


def measure_records_from_csv(text: str) -> list[MeasureRecord]:
    """Parse a measures CSV back into records; the per-tag/kind columns are
    rebuilt from their act_/evt_ prefixes."""

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    header = lines[0].split(",")
    records = []
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        actions = Counter(
            {k[4:]: int(v) for k, v in row.items() if k.startswith("act_") and int(v)}
        )
        events = Counter(
            {k[4:]: int(v) for k, v in row.items() if k.startswith("evt_") and int(v)}
        )
        records.append(
            MeasureRecord(
                record_id=row["id"],
                group=row["group"],
                direction=row["direction"],
                measure=Measure(
                    special_tokens=int(row["special_tokens"]),
                    payload_chars=int(row["payload_chars"]),
                    context_chars=int(row["context_chars"]),
                    n_states=int(row["n_states"]),
                    action_counts=actions,
                    event_counts=events,
                ),
            )
        )
    return records


def summary_csv_text(summary: dict) -> str:
    """Flat summary table: one row per (group, metric)."""

    rows = ["group,metric,mean,p25,p90"]
    for group, payload in summary["groups"].items():
        for name, row in payload["metrics"].items():
            rows.append(f"{group},{name},{row['mean']:.6g},{row['p25']:.6g},{row['p90']:.6g}")
    return "\n".join(rows) + "\n"


def nearest_rank(values: list[float], pct: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th order statistic."""

    if not values:
        raise ValueError("percentile of an empty sequence")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def _log_bins(values: list[float], n_bins: int) -> list[float]:
    lo = max(1.0, min(values))
    hi = max(values)
    if hi <= lo:
        hi = lo + 1.0
    return list(np.logspace(math.log10(lo), math.log10(hi), n_bins + 1))


def _linear_bins(values: list[float], n_bins: int) -> list[float]:
    lo = min(values)
    hi = max(values)
    if hi <= lo:
        hi = lo + 1.0
    return list(np.linspace(lo, hi, n_bins + 1))


def _histogram(values: list[float], edges: list[float]) -> list[int]:
    counts, _ = np.histogram(np.asarray(values, dtype=float), bins=np.asarray(edges))
    return [int(c) for c in counts]


class Aggregator:
    """Streaming fold over measure records; partials merge associatively."""

    def __init__(self) -> None:
        self._values: dict[str, dict[str, list[float]]] = defaultdict(
            lambda: defaultdict(list)
        )
        self._counts: dict[str, int] = defaultdict(int)

    def add(self, record: MeasureRecord) -> None:
        group = self._values[record.group]
        self._counts[record.group] += 1
        for name, value in record.metrics().items():
            group[name].append(float(value))

    def merge(self, other: "Aggregator") -> "Aggregator":
        for group, metrics in other._values.items():
            for name, values in metrics.items():
                self._values[group][name].extend(values)
            self._counts[group] += other._counts[group]
        return self

    def summary(self) -> dict:
        """Per-group mean/p25/p90 tables and histogram dumps."""

        out: dict = {"groups": {}}
        for group in sorted(self._values):
            n = self._counts[group]
            if n == 0:
                continue
            metrics = self._values[group]
            table = {}
            for name in sorted(metrics):
                values = metrics[name]
                # Metrics absent from a record count as zero for that record.
                padded = values + [0.0] * (n - len(values))
                table[name] = {
                    "mean": float(np.mean(padded)),
                    "p25": nearest_rank(padded, 25),
                    "p90": nearest_rank(padded, 90),
                }
            hists = {}
            for name, binner in (
                ("token_proxy", _log_bins),
                ("context_chars", _log_bins),
                ("n_actions", _linear_bins),
            ):
                values = metrics.get(name)
                if not values:
                    continue
                padded = values + [0.0] * (n - len(values))
                edges = binner(padded, TOKEN_HIST_BINS if binner is _log_bins else ACTION_HIST_BINS)
                hists[name] = {"edges": edges, "counts": _histogram(padded, edges)}
            out["groups"][group] = {"count": n, "metrics": table, "histograms": hists}
        return out


def aggregate(records: Iterable[MeasureRecord]) -> dict:
    """Aggregate a non-empty stream of measure records into a summary."""

    agg = Aggregator()
    n = 0
    for rec in records:
        agg.add(rec)
        n += 1
    if n == 0:
        raise ValueError("cannot aggregate an empty measure stream")
    return agg.summary()


def histogram_dump(summary: dict) -> str:
    """Gnuplot-friendly dump: one block per (group, metric) histogram with
    ``bin_lo bin_hi count`` columns."""

    lines = []
    for group, payload in summary["groups"].items():
        for name, hist in payload["histograms"].items():
            lines.append(f"# {group} {name}")
            edges, counts = hist["edges"], hist["counts"]
            for i, count in enumerate(counts):
                lines.append(f"{edges[i]:.6g} {edges[i + 1]:.6g} {count}")
            lines.append("")
    return "\n".join(lines)

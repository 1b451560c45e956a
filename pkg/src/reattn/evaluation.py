"""Ranking-quality metrics over TREC-style relevance judgments.

nDCG uses the linear gain ``rel / log2(rank + 1)`` (the trec_eval
convention) with the ideal DCG computed from the judged relevance values of
the same query; unjudged documents count as irrelevant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import ParseError, Run

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Qrels:
    """Graded relevance judgments: query_id -> doc_id -> relevance >= 0."""

    judgments: Mapping[str, Mapping[str, int]]

    def relevance(self, query_id: str, doc_id: str) -> int:
        return self.judgments.get(query_id, {}).get(doc_id, 0)

    def judged(self, query_id: str) -> Mapping[str, int]:
        return self.judgments.get(query_id, {})

    def query_ids(self) -> list[str]:
        return sorted(self.judgments)

    def __len__(self) -> int:
        return sum(len(docs) for docs in self.judgments.values())


def load_qrels(path: str | Path) -> Qrels:
    """Parse TREC qrels lines `<query_id> 0 <doc_id> <rel>`.

    Duplicate (query, doc) lines are tolerated -- the last one wins, with a
    warning -- but a negative relevance is a hard error.
    """
    judgments: dict[str, dict[str, int]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        qid, _, doc_id, rel_text = parts
        try:
            rel = int(rel_text)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: relevance {rel_text!r} not an integer") from exc
        if rel < 0:
            raise ParseError(f"{path}:{lineno}: negative relevance {rel}")
        per_query = judgments.setdefault(qid, {})
        if doc_id in per_query:
            log.warning("%s:%d: duplicate judgment for (%s, %s); keeping the last",
                        path, lineno, qid, doc_id)
        per_query[doc_id] = rel
    return Qrels(judgments=judgments)


def ndcg_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Normalized discounted cumulative gain at cutoff k, in [0, 1].

    Defined as 0 when the query has no relevant documents (ideal DCG zero).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    judged = qrels.judged(run.query_id)
    dcg = sum(
        judged.get(e.doc_id, 0) / math.log2(r + 1)
        for r, e in enumerate(run.entries[:k], start=1)
    )
    ideal = sorted(judged.values(), reverse=True)[:k]
    idcg = sum(rel / math.log2(r + 1) for r, rel in enumerate(ideal, start=1))
    return dcg / idcg if idcg > 0 else 0.0


def recall_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Fraction of this query's relevant documents present in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    judged = qrels.judged(run.query_id)
    relevant = {d for d, rel in judged.items() if rel > 0}
    if not relevant:
        return 0.0
    hits = sum(1 for e in run.entries[:k] if e.doc_id in relevant)
    return hits / len(relevant)


_METRIC_FUNCS = {"ndcg": ndcg_at_k, "recall": recall_at_k}


def parse_metric(spec: str):
    """Split a metric spec like "ndcg@10" into its function and cutoff."""
    name, _, k_text = spec.partition("@")
    if name not in _METRIC_FUNCS or not k_text.isdigit() or int(k_text) < 1:
        raise ValueError(f"bad metric spec {spec!r}; expected e.g. 'ndcg@10'")
    return _METRIC_FUNCS[name], int(k_text)


@dataclass(frozen=True)
class RunComparison:
    """Per-query and mean metrics for two runs over the same queries."""

    metrics: tuple[str, ...]
    query_ids: tuple[str, ...]
    per_query: Mapping[str, Mapping[str, tuple[float, float]]]
    means: Mapping[str, tuple[float, float]]

    def delta(self, metric: str) -> float:
        a, b = self.means[metric]
        return b - a

    def format_table(self, label_a: str = "A", label_b: str = "B") -> str:
        header = ["query"]
        for m in self.metrics:
            header += [f"{m}:{label_a}", f"{m}:{label_b}", f"{m}:delta"]
        rows = [header]
        for qid in self.query_ids:
            row = [qid]
            for m in self.metrics:
                a, b = self.per_query[qid][m]
                row += [f"{a:.4f}", f"{b:.4f}", f"{b - a:+.4f}"]
            rows.append(row)
        mean_row = ["mean"]
        for m in self.metrics:
            a, b = self.means[m]
            mean_row += [f"{a:.4f}", f"{b:.4f}", f"{b - a:+.4f}"]
        rows.append(mean_row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in rows
        )


def compare_runs(
    runs_a: Sequence[Run],
    runs_b: Sequence[Run],
    qrels: Qrels,
    metrics: Sequence[str] = ("ndcg@10",),
) -> RunComparison:
    """Evaluate two run sets side by side.

    Both sides must rank exactly the same query_ids; a mismatch raises
    KeyError since per-query deltas would be meaningless.
    """
    a_by_id = {r.query_id: r for r in runs_a}
    b_by_id = {r.query_id: r for r in runs_b}
    if set(a_by_id) != set(b_by_id):
        only_a = sorted(set(a_by_id) - set(b_by_id))
        only_b = sorted(set(b_by_id) - set(a_by_id))
        raise KeyError(f"query sets differ (only in A: {only_a}, only in B: {only_b})")

    parsed = [(spec, *parse_metric(spec)) for spec in metrics]
    query_ids = tuple(sorted(a_by_id))
    per_query: dict[str, dict[str, tuple[float, float]]] = {}
    for qid in query_ids:
        per_query[qid] = {
            spec: (func(a_by_id[qid], qrels, k), func(b_by_id[qid], qrels, k))
            for spec, func, k in parsed
        }
    means = {
        spec: (
            sum(per_query[q][spec][0] for q in query_ids) / len(query_ids),
            sum(per_query[q][spec][1] for q in query_ids) / len(query_ids),
        )
        for spec, _, _ in parsed
    }
    return RunComparison(
        metrics=tuple(m for m, _, _ in parsed),
        query_ids=query_ids,
        per_query=per_query,
        means=means,
    )

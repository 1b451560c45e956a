"""Brute-force re-scorer used as the ground truth in equivalence tests.

Every quantity is recomputed here with plain Python loops and ``math``,
sharing only the data types with the production modules -- none of their
computational code.  The same conventions apply (population standard
deviation in the outlier filter, clamping of negative mass in the token
distribution and in the mean-entropy weights, unit dispersion weight for
non-positive base scores, skipped normalization when the adjusted scores
have no positive sum), each implemented independently.

Deliberately single-threaded and unvectorized: simplicity is the point.
"""

from __future__ import annotations

import math

from .aggregate import ModeError, ShapeError, TokenScoreTable
from .core import PER_HEAD, RankingInstance, Run, RunEntry, SchemaError, validate_instance
from .pipeline import PipelineConfig, ScoreBreakdown


def _aggregate_rows(data, pairs, n_rows: int, n_cols: int, divisor: int) -> list[float]:
    scores = []
    for j in range(n_cols):
        total = 0.0
        for (l, h) in pairs:
            for k in range(n_rows):
                total += data[l][h][k][j]
        scores.append(total / divisor)
    return scores


def oracle_score(
    inst: RankingInstance, cfg: PipelineConfig = PipelineConfig()
) -> tuple[Run, list[ScoreBreakdown]]:
    """Score an instance exactly like the pipeline, the slow obvious way."""
    report = validate_instance(inst)
    if report:
        raise SchemaError("invalid instance: " + "; ".join(report))

    n_docs = len(inst.documents)
    doc_lens = [len(d.tokens) for d in inst.documents]
    total = sum(doc_lens)

    # Aggregation (or pass-through for pre-aggregated payloads).
    block = inst.attention_actual
    if block.mode == PER_HEAD:
        if cfg.heads.selection == "all":
            pairs = [
                (l, h) for l in range(block.num_layers) for h in range(block.num_heads)
            ]
        else:
            pairs = list(cfg.heads.subset)
            for (l, h) in pairs:
                if not (0 <= l < block.num_layers and 0 <= h < block.num_heads):
                    raise ShapeError(f"head ({l},{h}) out of range")
        actual_data = block.data.tolist()
        calib_data = inst.attention_calibration.data.tolist()
        raw_actual = _aggregate_rows(
            actual_data, pairs, len(inst.query_tokens), total, len(inst.query_tokens)
        )
        raw_calib = _aggregate_rows(
            calib_data,
            pairs,
            len(inst.calibration_tokens),
            total,
            len(inst.calibration_tokens),
        )
        source = "per_head"
    else:
        if cfg.heads.selection != "all":
            raise ModeError("cannot apply a head subset to pre-aggregated scores")
        raw_actual = [float(x) for x in inst.attention_actual.data.tolist()]
        raw_calib = [float(x) for x in inst.attention_calibration.data.tolist()]
        source = "precomputed"

    calibrated = [a - c for a, c in zip(raw_actual, raw_calib)]

    # Per-document slices and the outlier filter.
    tables: list[TokenScoreTable] = []
    offsets = []
    start = 0
    for doc, length in zip(inst.documents, doc_lens):
        offsets.append(start)
        doc_cal = calibrated[start : start + length]
        mean = 0.0
        for v in doc_cal:
            mean += v
        mean /= length
        var = 0.0
        for v in doc_cal:
            var += (v - mean) ** 2
        var /= length
        threshold = mean - 2.0 * math.sqrt(var)
        kept = [j for j, v in enumerate(doc_cal) if v > threshold]
        if not kept:
            kept = list(range(length))
        tables.append(
            TokenScoreTable(
                doc_id=doc.doc_id,
                raw_actual=tuple(raw_actual[start : start + length]),
                raw_calibration=tuple(raw_calib[start : start + length]),
                calibrated=tuple(doc_cal),
                filtered_indices=tuple(kept),
            )
        )
        start += length

    # IDF re-weighting.
    use_idf = cfg.method in ("idf_only", "reattn")
    use_entropy = cfg.method in ("entropy_only", "reattn")
    reweighted: list[list[float]] = []
    if use_idf:
        query_forms = []
        for t in inst.query_tokens:
            if t.normalized and t.normalized not in query_forms:
                query_forms.append(t.normalized)
        weights = {}
        for form in query_forms:
            df = 0
            for doc in inst.documents:
                if any(tok.normalized == form for tok in doc.tokens):
                    df += 1
            weights[form] = math.log((n_docs + 1) / (df + 1)) / math.log(n_docs + 1)
        for doc, table in zip(inst.documents, tables):
            row = []
            for tok, score in zip(doc.tokens, table.calibrated):
                if tok.normalized and tok.normalized in weights:
                    row.append(weights[tok.normalized] * score)
                else:
                    row.append(score)
            reweighted.append(row)
    else:
        reweighted = [list(t.calibrated) for t in tables]

    bases = []
    for row, table in zip(reweighted, tables):
        b = 0.0
        for j in table.filtered_indices:
            b += row[j]
        bases.append(b)

    # Entropy regularization.
    if use_entropy:
        dists: list[list[float] | None] = []
        entropies: list[float] = []
        for row, table in zip(reweighted, tables):
            clamped = [row[j] if row[j] > 0.0 else 0.0 for j in table.filtered_indices]
            positive_total = 0.0
            for v in clamped:
                positive_total += v
            if positive_total <= cfg.eps:
                dists.append(None)
                entropies.append(0.0)
                continue
            p = [v / positive_total for v in clamped]
            dists.append(p)
            if len(table.filtered_indices) <= 1:
                entropies.append(0.0)
            else:
                h = 0.0
                for v in p:
                    if v > 0.0:
                        h -= v * math.log(v)
                entropies.append(h / math.log(len(table.filtered_indices)))
        weight_total = 0.0
        weighted_sum = 0.0
        for b, e in zip(bases, entropies):
            w = b if b > 0.0 else 0.0
            weight_total += w
            weighted_sum += w * e
        if weight_total <= cfg.eps:
            mean_entropy = 0.0
            for e in entropies:
                mean_entropy += e
            mean_entropy /= n_docs
        else:
            mean_entropy = weighted_sum / weight_total
        disp = []
        for b, e in zip(bases, entropies):
            disp.append(1.0 + (e - mean_entropy) if b > 0.0 else 1.0)
        adjusted = [b * w for b, w in zip(bases, disp)]
        adj_total = 0.0
        for s in adjusted:
            adj_total += s
        if adj_total > cfg.eps:
            finals = [s / adj_total for s in adjusted]
        else:
            finals = list(adjusted)
        mean_entropy_out: float | None = mean_entropy
    else:
        dists = [None] * n_docs
        entropies = [None] * n_docs  # type: ignore[list-item]
        mean_entropy_out = None
        disp = [1.0] * n_docs
        adjusted = list(bases)
        finals = list(bases)

    breakdowns = [
        ScoreBreakdown(
            doc_id=t.doc_id,
            tokens=t,
            reweighted=tuple(r),
            base_score=b,
            token_distribution=None if p is None else tuple(p),
            entropy=e,
            mean_entropy=mean_entropy_out,
            dispersion_weight=w,
            adjusted_score=a,
            final_score=f,
            aggregation=source,
        )
        for t, r, b, p, e, w, a, f in zip(
            tables, reweighted, bases, dists, entropies, disp, adjusted, finals
        )
    ]

    ordered = sorted(breakdowns, key=lambda bd: (-bd.final_score, bd.doc_id))
    entries = tuple(
        RunEntry(doc_id=bd.doc_id, score=bd.final_score, rank=i + 1)
        for i, bd in enumerate(ordered)
    )
    return Run(query_id=inst.query_id, entries=entries), breakdowns

"""Turning raw attention into calibrated per-token scores.

The token score of a document token is the mean, over query tokens, of all
attention it receives from the query across the selected (layer, head)
pairs.  Scoring a content-free calibration query the same way captures the
model's query-independent bias (long documents, punctuation); subtracting it
leaves a calibrated score.  Tokens whose calibrated score is abnormally
negative -- more than two standard deviations below their document's mean --
are dropped before document scores are formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AGGREGATED, PER_HEAD, AttentionBlock, HeadSet, RankingInstance


class ModeError(ValueError):
    """Operation not defined for this attention mode."""


class ShapeError(ValueError):
    """Head selection or matrix shape inconsistent with the block."""


class LengthMismatchError(ValueError):
    """Paired sequences have different lengths."""


@dataclass(frozen=True)
class TokenScoreTable:
    """Per-document token scores at every stage before re-weighting."""

    doc_id: str
    raw_actual: tuple[float, ...]
    raw_calibration: tuple[float, ...]
    calibrated: tuple[float, ...]
    filtered_indices: tuple[int, ...]


def resolve_heads(heads: HeadSet, num_layers: int, num_heads: int) -> list[tuple[int, int]]:
    """Expand a head selection into explicit (layer, head) pairs."""
    if heads.selection == "all":
        return [(l, h) for l in range(num_layers) for h in range(num_heads)]
    for l, h in heads.subset:
        if not (0 <= l < num_layers and 0 <= h < num_heads):
            raise ShapeError(
                f"head ({l},{h}) out of range for {num_layers} layers x {num_heads} heads"
            )
    return list(heads.subset)


def aggregate_token_scores(
    block: AttentionBlock, query_len: int, heads: HeadSet = HeadSet.all_heads()
) -> np.ndarray:
    """Sum attention from every query token over the selected heads, then
    divide by the query length.

    Returns one nonnegative score per document token.
    """
    if block.mode != PER_HEAD:
        raise ModeError("token aggregation needs a per_head block")
    if query_len < 1 or block.data.shape[2] != query_len:
        raise ShapeError(
            f"query length {query_len} does not match matrix rows {block.data.shape[2]}"
        )
    pairs = resolve_heads(heads, block.num_layers, block.num_heads)
    ls, hs = zip(*pairs)
    selected = block.data[np.array(ls), np.array(hs)]  # (pairs, rows, doc_tokens)
    return selected.sum(axis=(0, 1)) / query_len


def calibrate(actual: np.ndarray, calibration: np.ndarray) -> np.ndarray:
    """Subtract the calibration score from the actual score, elementwise.

    Results may be negative: the calibration query can attract more attention
    than the actual one.
    """
    actual = np.asarray(actual, dtype=np.float64)
    calibration = np.asarray(calibration, dtype=np.float64)
    if actual.shape != calibration.shape:
        raise LengthMismatchError(
            f"actual has {actual.shape} scores, calibration {calibration.shape}"
        )
    return actual - calibration


def filter_tokens(calibrated: Sequence[float]) -> list[int]:
    """Keep token indices scoring above mean - 2 * (population) std dev.

    If the strict comparison keeps nothing (all scores equal, so the std dev
    is zero), every index is kept instead -- a document must never lose all
    of its tokens.
    """
    arr = np.asarray(calibrated, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot filter an empty score list")
    threshold = arr.mean() - 2.0 * arr.std()
    kept = [i for i, v in enumerate(arr) if v > threshold]
    return kept if kept else list(range(arr.size))


def icr_document_score(table: TokenScoreTable) -> float:
    """Sum the calibrated scores of the surviving tokens."""
    return float(np.sum([table.calibrated[i] for i in table.filtered_indices]))


def build_token_tables(
    inst: RankingInstance, heads: HeadSet = HeadSet.all_heads()
) -> tuple[list[TokenScoreTable], str]:
    """Run aggregation, calibration, and filtering for every document.

    Per-head blocks are aggregated here; aggregated-mode blocks carry scores
    already reduced upstream, so their values are taken as-is (a head subset
    cannot be applied to them and raises ModeError).  Returns the tables in
    document order plus the provenance of the aggregation step
    ("per_head" or "precomputed").
    """
    actual_block = inst.attention_actual
    if actual_block.mode == PER_HEAD:
        actual = aggregate_token_scores(actual_block, len(inst.query_tokens), heads)
        calibration = aggregate_token_scores(
            inst.attention_calibration, len(inst.calibration_tokens), heads
        )
        source = "per_head"
    else:
        if heads.selection != "all":
            raise ModeError("cannot apply a head subset to pre-aggregated scores")
        actual = np.asarray(actual_block.data, dtype=np.float64)
        calibration = np.asarray(inst.attention_calibration.data, dtype=np.float64)
        source = "precomputed"

    calibrated = calibrate(actual, calibration)
    tables = []
    for doc, sl in zip(inst.documents, inst.doc_slices()):
        doc_cal = calibrated[sl]
        tables.append(
            TokenScoreTable(
                doc_id=doc.doc_id,
                raw_actual=tuple(float(x) for x in actual[sl]),
                raw_calibration=tuple(float(x) for x in calibration[sl]),
                calibrated=tuple(float(x) for x in doc_cal),
                filtered_indices=tuple(filter_tokens(doc_cal)),
            )
        )
    return tables, source

"""Post-hoc re-weighting of calibrated attention scores.

Two adjustments, applied after aggregation/calibration/filtering and
composable independently:

* Cross-document IDF re-weighting.  Token scores of document tokens that
  lexically match the query are scaled by a normalized inverse document
  frequency weight ``w = log((N+1)/(df+1)) / log(N+1)``, so a query term
  occurring in most candidates stops dominating the ranking while terms
  unique to one document keep full weight.

* Entropy regularization.  Each document's (clamped) token-score mass is
  normalized into a distribution whose Shannon entropy, divided by
  ``log |S|``, measures how broadly the document's attention is spread.
  Documents above the base-score-weighted mean entropy get boosted by
  ``W = 1 + (E - E_bar)``, documents with a narrow spike get shrunk.

Method variants: ``icr`` stops after filtering (plain calibrated sums),
``idf_only`` applies just the first step, ``entropy_only`` just the second,
``reattn`` both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .aggregate import LengthMismatchError, TokenScoreTable, build_token_tables
from .core import HeadSet, RankingInstance, Run, SchemaError, Token, make_run, validate_instance
from .tokenmatch import document_frequency, query_membership

METHODS = ("icr", "idf_only", "entropy_only", "reattn")


class DomainError(ValueError):
    """Argument outside the mathematical domain of the operation."""


class MissingWeightError(ValueError):
    """A masked token has no IDF weight -- mask and weight table disagree."""


@dataclass(frozen=True)
class PipelineConfig:
    """Which re-weighting steps run, and over which heads."""

    method: str = "reattn"
    heads: HeadSet = field(default_factory=HeadSet.all_heads)
    # Sums at or below eps count as degenerate denominators. Zero keeps the
    # checks exact; raise it only for inputs with known dirty near-zeros.
    eps: float = 0.0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")

    @property
    def use_idf(self) -> bool:
        return self.method in ("idf_only", "reattn")

    @property
    def use_entropy(self) -> bool:
        return self.method in ("entropy_only", "reattn")


@dataclass(frozen=True)
class ScoreBreakdown:
    """Every intermediate behind one document's final score.

    ``entropy``, ``mean_entropy`` and ``token_distribution`` are None for
    methods that skip the entropy step; ``dispersion_weight`` is then 1.
    """

    doc_id: str
    tokens: TokenScoreTable
    reweighted: tuple[float, ...]
    base_score: float
    token_distribution: tuple[float, ...] | None
    entropy: float | None
    mean_entropy: float | None
    dispersion_weight: float
    adjusted_score: float
    final_score: float
    aggregation: str


# ---------------------------------------------------------------------------
# IDF re-weighting
# ---------------------------------------------------------------------------


def idf_weight(df: int, n_docs: int) -> float:
    """Normalized inverse document frequency in [0, 1].

    1 for a token absent from every candidate, 0 for a token present in all
    of them, strictly decreasing in between.
    """
    if n_docs < 1:
        raise DomainError("need at least one document")
    if not 0 <= df <= n_docs:
        raise DomainError(f"df={df} outside [0, {n_docs}]")
    return math.log((n_docs + 1) / (df + 1)) / math.log(n_docs + 1)


def idf_weights(df_table: Mapping[str, int], n_docs: int) -> dict[str, float]:
    """IDF weight for every normalized query token in a frequency table."""
    return {tok: idf_weight(df, n_docs) for tok, df in df_table.items()}


def reweight_tokens(
    calibrated: Sequence[float],
    tokens: Sequence[Token],
    mask: Sequence[bool],
    weights: Mapping[str, float],
) -> np.ndarray:
    """Scale query-matching token scores by their IDF weight.

    Non-matching tokens pass through unchanged.  A masked token whose
    normalized form is missing from ``weights`` signals an upstream
    mask/table mismatch and raises MissingWeightError.
    """
    if not (len(calibrated) == len(tokens) == len(mask)):
        raise LengthMismatchError(
            f"scores/tokens/mask lengths differ: {len(calibrated)}/{len(tokens)}/{len(mask)}"
        )
    out = np.asarray(calibrated, dtype=np.float64).copy()
    for j, (token, flagged) in enumerate(zip(tokens, mask)):
        if not flagged:
            continue
        try:
            out[j] *= weights[token.normalized]
        except KeyError:
            raise MissingWeightError(
                f"no IDF weight for matched token {token.surface!r}"
            ) from None
    return out


def base_score(reweighted: Sequence[float], filtered_indices: Sequence[int]) -> float:
    """Document base score: sum of re-weighted scores over surviving tokens.

    May be zero or negative; negative scores can survive the outlier filter.
    """
    return float(np.sum([reweighted[i] for i in filtered_indices]))


# ---------------------------------------------------------------------------
# Entropy regularization
# ---------------------------------------------------------------------------


def token_distribution(
    reweighted: Sequence[float], filtered_indices: Sequence[int], eps: float = 0.0
) -> np.ndarray | None:
    """Normalize surviving token scores into a probability distribution.

    Negative scores are clamped to zero first (probability mass cannot be
    negative).  Returns None when no positive mass remains -- the degenerate
    case, scored as zero entropy downstream.
    """
    clamped = np.array([max(float(reweighted[i]), 0.0) for i in filtered_indices])
    total = clamped.sum()
    if total <= eps:
        return None
    return clamped / total


def normalized_entropy(p: Sequence[float] | None, set_size: int) -> float:
    """Shannon entropy of ``p`` divided by log(set_size), in [0, 1].

    A single-token set or a degenerate distribution scores 0: both are
    maximal concentration.  The log base cancels in the ratio.
    """
    if p is None or set_size <= 1:
        return 0.0
    raw = -float(np.sum([x * math.log(x) for x in p if x > 0.0]))
    return raw / math.log(set_size)


def weighted_mean_entropy(
    base_scores: Sequence[float], entropies: Sequence[float], eps: float = 0.0
) -> float:
    """Mean entropy over documents, weighted by clamped base scores.

    Documents with non-positive base score carry no meaningful attention
    mass, so their weight is clamped to zero.  If nothing has positive mass
    the plain arithmetic mean is used.
    """
    if len(base_scores) != len(entropies):
        raise LengthMismatchError(
            f"{len(base_scores)} base scores vs {len(entropies)} entropies"
        )
    weights = [max(float(b), 0.0) for b in base_scores]
    total = float(np.sum(weights))
    if total <= eps:
        return float(np.mean(entropies))
    return float(np.sum([w * e for w, e in zip(weights, entropies)])) / total


def dispersion_weight(entropy: float, mean_entropy: float) -> float:
    """Per-document boost/penalty ``1 + (E - E_bar)``, in [0, 2]."""
    return 1.0 + (entropy - mean_entropy)


def _effective_weights(
    base_scores: Sequence[float], weights: Sequence[float]
) -> list[float]:
    # Non-positively scored documents get no entropy adjustment.
    return [1.0 if b <= 0.0 else float(w) for b, w in zip(base_scores, weights)]


def _normalize_scores(adjusted: Sequence[float], eps: float = 0.0) -> list[float]:
    total = float(np.sum(adjusted))
    if total <= eps:
        # Normalization is a positive rescaling; skipping keeps the ranking
        # and avoids flipping signs.
        return [float(s) for s in adjusted]
    return [float(s) / total for s in adjusted]


def final_scores(
    base_scores: Sequence[float], weights: Sequence[float], eps: float = 0.0
) -> list[float]:
    """Apply dispersion weights and normalize scores to sum to one.

    Documents with non-positive base score keep it unweighted.  When the
    adjusted scores have no positive sum, normalization is skipped (it would
    not change the ranking anyway).
    """
    if len(base_scores) != len(weights):
        raise LengthMismatchError(f"{len(base_scores)} base scores vs {len(weights)} weights")
    effective = _effective_weights(base_scores, weights)
    adjusted = [float(b) * w for b, w in zip(base_scores, effective)]
    return _normalize_scores(adjusted, eps)


# ---------------------------------------------------------------------------
# Composed pipeline
# ---------------------------------------------------------------------------


def reattn_pipeline(
    inst: RankingInstance, cfg: PipelineConfig = PipelineConfig()
) -> tuple[Run, list[ScoreBreakdown]]:
    """Score every document of an instance and rank them.

    Returns the run (sorted by final score, ties broken by doc_id) plus one
    breakdown per document in document order, exposing every intermediate
    for debugging and ablation.
    """
    report = validate_instance(inst)
    if report:
        raise SchemaError("invalid instance: " + "; ".join(report))

    tables, source = build_token_tables(inst, cfg.heads)

    if cfg.use_idf:
        df_table = document_frequency(inst.documents, inst.query_tokens)
        weights = idf_weights(df_table, inst.num_documents)
        masks = query_membership(inst.documents, inst.query_tokens)
        reweighted = [
            reweight_tokens(t.calibrated, doc.tokens, mask, weights)
            for t, doc, mask in zip(tables, inst.documents, masks)
        ]
    else:
        reweighted = [np.asarray(t.calibrated, dtype=np.float64) for t in tables]

    bases = [base_score(r, t.filtered_indices) for r, t in zip(reweighted, tables)]

    if cfg.use_entropy:
        dists = [
            token_distribution(r, t.filtered_indices, cfg.eps)
            for r, t in zip(reweighted, tables)
        ]
        entropies = [
            normalized_entropy(p, len(t.filtered_indices)) for p, t in zip(dists, tables)
        ]
        mean_entropy = weighted_mean_entropy(bases, entropies, cfg.eps)
        disp = _effective_weights(
            bases, [dispersion_weight(e, mean_entropy) for e in entropies]
        )
        adjusted = [b * w for b, w in zip(bases, disp)]
        finals = _normalize_scores(adjusted, cfg.eps)
    else:
        dists = [None] * len(tables)
        entropies = [None] * len(tables)  # type: ignore[list-item]
        mean_entropy = None
        disp = [1.0] * len(tables)
        adjusted = list(bases)
        finals = list(bases)

    breakdowns = [
        ScoreBreakdown(
            doc_id=t.doc_id,
            tokens=t,
            reweighted=tuple(float(x) for x in r),
            base_score=b,
            token_distribution=None if p is None else tuple(float(x) for x in p),
            entropy=e,
            mean_entropy=mean_entropy,
            dispersion_weight=w,
            adjusted_score=a,
            final_score=f,
            aggregation=source,
        )
        for t, r, b, p, e, w, a, f in zip(
            tables, reweighted, bases, dists, entropies, disp, adjusted, finals
        )
    ]
    run = make_run(inst.query_id, {bd.doc_id: bd.final_score for bd in breakdowns})
    return run, breakdowns


def breakdown_report(
    run: Run, breakdowns: Sequence[ScoreBreakdown], method: str
) -> dict:
    """Serializable per-document score report for the --explain output."""
    return {
        "query_id": run.query_id,
        "method": method,
        "aggregation": breakdowns[0].aggregation if breakdowns else None,
        "E_bar": breakdowns[0].mean_entropy if breakdowns else None,
        "documents": [
            {
                "doc_id": bd.doc_id,
                "B": bd.base_score,
                "E": bd.entropy,
                "E_bar": bd.mean_entropy,
                "W": bd.dispersion_weight,
                "s_prime": bd.adjusted_score,
                "s_final": bd.final_score,
                "filtered_indices": list(bd.tokens.filtered_indices),
                "calibrated": list(bd.tokens.calibrated),
                "reweighted": list(bd.reweighted),
            }
            for bd in breakdowns
        ],
    }

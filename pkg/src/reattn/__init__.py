"""Attention-signal document re-ranking.

Turns serialized LLM attention payloads into document rankings: calibrated
attention aggregation as the baseline scorer, plus two post-hoc adjustments
-- cross-document IDF re-weighting of query-matching tokens and
entropy-based dispersion weighting -- with an evaluation harness, a seeded
synthetic-instance generator, and a brute-force verification oracle.
"""

__version__ = "0.1.0"

from .aggregate import (
    LengthMismatchError,
    ModeError,
    ShapeError,
    TokenScoreTable,
    aggregate_token_scores,
    build_token_tables,
    calibrate,
    filter_tokens,
    icr_document_score,
)
from .core import (
    AGGREGATED,
    PER_HEAD,
    AttentionBlock,
    Document,
    HeadSet,
    ParseError,
    RankingInstance,
    Run,
    RunEntry,
    SchemaError,
    Token,
    VersionError,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    load_runs,
    make_run,
    save_instance,
    save_run,
    save_runs,
    tokens_from_surfaces,
    validate_instance,
)
from .evaluation import (
    Qrels,
    RunComparison,
    compare_runs,
    load_qrels,
    ndcg_at_k,
    recall_at_k,
)
from .oracle import oracle_score
from .pipeline import (
    DomainError,
    MissingWeightError,
    PipelineConfig,
    ScoreBreakdown,
    base_score,
    breakdown_report,
    dispersion_weight,
    final_scores,
    idf_weight,
    idf_weights,
    normalized_entropy,
    reattn_pipeline,
    reweight_tokens,
    token_distribution,
    weighted_mean_entropy,
)
from .synth import ParamError, SynthInstance, SynthParams, generate_instance
from .tokenmatch import document_frequency, normalize_token, query_membership

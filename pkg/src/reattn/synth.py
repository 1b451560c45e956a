"""Deterministic synthetic ranking instances for testing and benchmarking.

The generator builds numeric scenarios, not language: designated relevant
documents receive an elevated attention budget on their content tokens,
documents sharing tokens with the query attract a lexical echo on the
matching tokens, punctuation attracts bias in both the actual and the
calibration pass, and a sharpness knob controls whether a document's budget
lands on one token or is spread broadly.  All randomness comes from numpy's
PCG64 stream seeded from ``SynthParams.seed``, so the same parameters always
reproduce the same instance byte for byte.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import (
    AGGREGATED,
    PER_HEAD,
    AttentionBlock,
    Document,
    RankingInstance,
    tokens_from_surfaces,
)
from .evaluation import Qrels

# Attention composition constants. Background noise sits far below any
# placed signal; punctuation bias is shared by both passes so calibration
# cancels it; the lexical echo rewards query-matching tokens, mostly from
# the matching query row.
NOISE_HI = 0.002
PUNCT_BIAS = (0.2, 0.5)
ECHO = (0.25, 0.75)
ECHO_OFF_ROW = 0.25
MASS_JITTER = (0.8, 1.2)
CALIBRATION_SPIKE = (0.5, 0.9)
CALIBRATION_SPIKE_RATE = 0.15
PUNCT_RATE = 0.05

_PUNCT = (",", ".", "!", "?")


class ParamError(ValueError):
    """Generator parameters outside their documented ranges."""


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the instance generator.

    ``overlap_rate`` is the probability that a document token duplicates a
    query token (the lexical-bias stressor); ``concentration`` in [0, 1]
    shrinks the number of tokens a document's attention budget lands on,
    down to a single token at 1 (the signal-concentration stressor).
    ``relevant_mass`` and ``distractor_mass`` are per-document attention
    budget ranges; the ``relevant_*`` overrides let a scenario give relevant
    documents a different overlap or spread than the rest, and
    ``min_query_copies_per_doc`` plants every query token in every document
    that many times, forcing maximal document frequency for all query terms.
    """

    seed: int = 0
    n_docs: int = 8
    tokens_per_doc: tuple[int, int] = (8, 24)
    n_layers: int = 2
    n_heads: int = 2
    query_len: int = 4
    overlap_rate: float = 0.25
    concentration: float = 0.3
    relevant_doc_count: int = 1
    attention_mode: str = PER_HEAD
    relevant_mass: tuple[float, float] = (0.5, 0.9)
    distractor_mass: tuple[float, float] = (0.3, 0.7)
    relevant_overlap_rate: float | None = None
    relevant_concentration: float | None = None
    min_query_copies_per_doc: int = 0

    def validate(self) -> None:
        if self.n_docs < 1 or self.n_layers < 1 or self.n_heads < 1 or self.query_len < 1:
            raise ParamError("counts must be >= 1")
        lo, hi = self.tokens_per_doc
        if lo < 1 or hi < lo:
            raise ParamError(f"bad tokens_per_doc range {self.tokens_per_doc}")
        for name in ("overlap_rate", "concentration"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParamError(f"{name}={value} outside [0, 1]")
        for name in ("relevant_overlap_rate", "relevant_concentration"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ParamError(f"{name}={value} outside [0, 1]")
        for name in ("relevant_mass", "distractor_mass"):
            m_lo, m_hi = getattr(self, name)
            if not 0.0 <= m_lo <= m_hi <= 1.0:
                raise ParamError(f"{name}={getattr(self, name)} not an ascending range in [0, 1]")
        if not 1 <= self.relevant_doc_count <= self.n_docs:
            raise ParamError("relevant_doc_count must be in [1, n_docs]")
        if self.attention_mode not in (PER_HEAD, AGGREGATED):
            raise ParamError(f"unknown attention mode {self.attention_mode!r}")
        if self.min_query_copies_per_doc < 0:
            raise ParamError("min_query_copies_per_doc must be >= 0")
        if self.min_query_copies_per_doc * self.query_len > lo:
            raise ParamError("planted query copies exceed the minimum document length")


@dataclass(frozen=True)
class SynthInstance:
    instance: RankingInstance
    qrels: Qrels
    relevant_doc_ids: tuple[str, ...]


def _decorate(rng: np.random.Generator, word: str) -> str:
    """Wrap a word the way subword tokenizers tend to: markers and casing."""
    if rng.random() < 0.5:
        word = "Ġ" + word
    if rng.random() < 0.3:
        bare = word.lstrip("Ġ")
        word = word[: len(word) - len(bare)] + bare[:1].upper() + bare[1:]
    return word


def generate_instance(params: SynthParams) -> SynthInstance:
    """Build a ranking instance (plus implied qrels) from the parameters.

    Deterministic in the seed: relevant documents are drawn first, then
    token lists, then the attention payloads, so equal parameters always
    produce identical output.
    """
    params.validate()
    rng = np.random.Generator(np.random.PCG64(params.seed))
    n = params.n_docs
    qlen = params.query_len

    query_words = [f"qword{i}" for i in range(qlen)]
    query_tokens = tokens_from_surfaces(query_words)
    calibration_tokens = tokens_from_surfaces(["N/A"])

    relevant = set(
        int(i) for i in rng.choice(n, size=params.relevant_doc_count, replace=False)
    )

    # Token lists. Slot kinds: planted query copies, random query copies,
    # punctuation, or filler content words.
    doc_surfaces: list[list[str]] = []
    lo, hi = params.tokens_per_doc
    for i in range(n):
        overlap = params.overlap_rate
        if i in relevant and params.relevant_overlap_rate is not None:
            overlap = params.relevant_overlap_rate
        length = int(rng.integers(lo, hi + 1))
        surfaces: list[str] = []
        for _ in range(params.min_query_copies_per_doc):
            for word in query_words:
                surfaces.append(_decorate(rng, word))
        while len(surfaces) < length:
            u = rng.random()
            if u < overlap:
                surfaces.append(_decorate(rng, query_words[int(rng.integers(qlen))]))
            elif u < overlap + PUNCT_RATE:
                surfaces.append(_PUNCT[int(rng.integers(len(_PUNCT)))])
            else:
                surfaces.append(f"w{int(rng.integers(50_000))}")
        order = rng.permutation(len(surfaces))
        doc_surfaces.append([surfaces[int(j)] for j in order])

    width = len(str(n))
    documents = tuple(
        Document(doc_id=f"d{i + 1:0{width}d}", tokens=tokens_from_surfaces(s))
        for i, s in enumerate(doc_surfaces)
    )

    total = sum(len(d) for d in documents)
    shape_actual = (params.n_layers, params.n_heads, qlen, total)
    shape_calib = (params.n_layers, params.n_heads, len(calibration_tokens), total)
    actual = rng.uniform(0.0, NOISE_HI, shape_actual)
    calib = rng.uniform(0.0, NOISE_HI, shape_calib)

    query_forms = {t.normalized: t.index for t in query_tokens}
    col = 0
    for i, doc in enumerate(documents):
        content_cols: list[int] = []
        for t in doc.tokens:
            j = col + t.index
            if t.normalized in query_forms:
                # Lexical echo: strongest from the matching query token's row.
                echo = rng.uniform(*ECHO, size=(params.n_layers, params.n_heads))
                actual[:, :, :, j] += ECHO_OFF_ROW * echo[:, :, None]
                actual[:, :, query_forms[t.normalized], j] += (1.0 - ECHO_OFF_ROW) * echo
            elif not t.normalized:
                bias = rng.uniform(*PUNCT_BIAS)
                actual[:, :, :, j] += bias
                calib[:, :, :, j] += bias
            else:
                content_cols.append(j)

        conc = params.concentration
        mass_range = params.distractor_mass
        if i in relevant:
            mass_range = params.relevant_mass
            if params.relevant_concentration is not None:
                conc = params.relevant_concentration
        target_cols = content_cols or list(range(col, col + len(doc)))
        support_size = max(1, round((1.0 - conc) * len(target_cols)))
        support = np.sort(rng.choice(target_cols, size=support_size, replace=False))
        # The budget is split across the support, so a broad and a spiky
        # document with equal budgets contribute comparable totals.
        budget = rng.uniform(*mass_range)
        jitter = rng.uniform(
            *MASS_JITTER, size=(params.n_layers, params.n_heads, qlen, support_size)
        )
        actual[:, :, :, support] += (budget / support_size) * jitter
        col += len(doc)

    if rng.random() < CALIBRATION_SPIKE_RATE:
        spike_col = int(rng.integers(total))
        calib[:, :, :, spike_col] += rng.uniform(*CALIBRATION_SPIKE)

    np.clip(actual, 0.0, 1.0, out=actual)
    np.clip(calib, 0.0, 1.0, out=calib)

    if params.attention_mode == AGGREGATED:
        block_actual = AttentionBlock(
            AGGREGATED, params.n_layers, params.n_heads, actual.sum(axis=(0, 1, 2)) / qlen
        )
        block_calib = AttentionBlock(
            AGGREGATED,
            params.n_layers,
            params.n_heads,
            calib.sum(axis=(0, 1, 2)) / len(calibration_tokens),
        )
    else:
        block_actual = AttentionBlock(PER_HEAD, params.n_layers, params.n_heads, actual)
        block_calib = AttentionBlock(PER_HEAD, params.n_layers, params.n_heads, calib)

    query_id = f"synth-{params.seed}"
    instance = RankingInstance(
        query_text=" ".join(query_words),
        query_tokens=query_tokens,
        calibration_tokens=calibration_tokens,
        documents=documents,
        attention_actual=block_actual,
        attention_calibration=block_calib,
        metadata={
            "query_id": query_id,
            "generator": "reattn.synth (numpy PCG64)",
            "params": asdict(params),
        },
    )
    relevant_ids = tuple(sorted(documents[i].doc_id for i in relevant))
    qrels = Qrels(
        judgments={
            query_id: {d.doc_id: (1 if d.doc_id in relevant_ids else 0) for d in documents}
        }
    )
    return SynthInstance(instance=instance, qrels=qrels, relevant_doc_ids=relevant_ids)


# ---------------------------------------------------------------------------
# Stress scenarios used by the behavioral checks
# ---------------------------------------------------------------------------


def lexical_bias_params(seed: int) -> SynthParams:
    """Distractors stuffed with query tokens that occur in every document.

    Every query term is planted in every candidate, so its document
    frequency is maximal; the relevant document carries its signal on
    distinctive content tokens instead, while the distractors' standing
    comes almost entirely from the lexical echo.
    """
    return SynthParams(
        seed=seed,
        n_docs=8,
        tokens_per_doc=(16, 24),
        n_layers=1,
        n_heads=2,
        query_len=4,
        overlap_rate=0.75,
        relevant_overlap_rate=0.05,
        concentration=0.4,
        relevant_doc_count=1,
        relevant_mass=(0.5, 0.9),
        distractor_mass=(0.05, 0.25),
        min_query_copies_per_doc=1,
    )


def concentration_params(seed: int) -> SynthParams:
    """Spiky distractors against one broad-coverage relevant document.

    Budgets overlap, so the plain calibrated sum frequently ranks a spiky
    distractor above the broad relevant document.
    """
    return SynthParams(
        seed=seed,
        n_docs=8,
        tokens_per_doc=(16, 24),
        n_layers=1,
        n_heads=2,
        query_len=4,
        overlap_rate=0.0,
        concentration=0.95,
        relevant_concentration=0.0,
        relevant_doc_count=1,
        relevant_mass=(0.5, 0.9),
        distractor_mass=(0.4, 1.0),
    )

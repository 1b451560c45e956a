"""Extraction job description and error types."""

from __future__ import annotations

from dataclasses import dataclass

PER_HEAD = "per_head"
AGGREGATED = "aggregated"


class ModelLoadError(RuntimeError):
    """The model (or its tokenizer) could not be loaded."""


class CaptureError(RuntimeError):
    """The model ran but did not yield usable attention weights."""


class ContextOverflow(RuntimeError):
    """The tokenized prompt exceeds the model's context length."""


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    text: str
    title: str | None = None


@dataclass(frozen=True)
class ExtractionJob:
    """One query, its candidate documents, and how to capture attention.

    ``per_head`` keeps the raw per-(layer, head) slices; ``aggregated``
    reduces them on the fly with ``head_mask`` (every head when None) and
    stores one score per document token.  ``prompt_prefix``/``prompt_suffix``
    are pass-through template hooks, empty by default.
    """

    model: str
    query: str
    documents: tuple[SourceDocument, ...]
    mode: str = PER_HEAD
    head_mask: tuple[tuple[int, int], ...] | None = None
    prompt_prefix: str = ""
    prompt_suffix: str = ""
    query_id: str = "q0"
    out_path: str | None = None

    def __post_init__(self) -> None:
        if not self.documents:
            raise ValueError("job needs at least one document")
        if self.mode not in (PER_HEAD, AGGREGATED):
            raise ValueError(f"unknown capture mode {self.mode!r}")
        if self.head_mask is not None and self.mode != AGGREGATED:
            raise ValueError("a head mask only applies to aggregated capture")
        ids = [d.doc_id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate document ids in job")

"""Domain types, dump-file I/O, and structural validation.

A *dump* is the JSON container handed over by an attention extractor (or the
synthetic generator): one query, its candidate documents with token lists,
and two attention payloads captured from a language model -- one for the
actual query and one for a content-free calibration query.  All numeric
payloads are 64-bit floats serialized as decimal text, so a save/load cycle
is bit-exact.

Everything here is immutable after construction; functions are pure or
write-once to disk.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tokenmatch import normalize_token

SCHEMA_VERSION = 1

PER_HEAD = "per_head"
AGGREGATED = "aggregated"

RUN_FORMATS = ("trec", "json")


class ParseError(ValueError):
    """The file is not a well-formed container (e.g. broken JSON)."""


class SchemaError(ValueError):
    """The container parsed but violates the dump schema or an invariant."""


class VersionError(SchemaError):
    """The dump declares a schema_version this code does not understand."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    """One tokenizer token: raw surface, normalized matching form, position."""

    surface: str
    normalized: str
    index: int

    @classmethod
    def from_surface(cls, surface: str, index: int) -> "Token":
        return cls(surface=surface, normalized=normalize_token(surface), index=index)


def tokens_from_surfaces(surfaces: Iterable[str]) -> tuple[Token, ...]:
    return tuple(Token.from_surface(s, i) for i, s in enumerate(surfaces))


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[Token, ...]
    char_text: str | None = None

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class AttentionBlock:
    """Attention payload for one forward pass.

    In ``per_head`` mode ``data`` has shape (layers, heads, rows, doc_tokens)
    where rows are the (calibration) query tokens and columns are all
    document tokens concatenated in listing order.  Values are slices of
    softmax rows, hence in [0, 1] but with no row-sum constraint.  In
    ``aggregated`` mode ``data`` is a flat nonnegative vector of one score
    per document token, produced upstream by a fixed head mask.
    """

    mode: str
    num_layers: int
    num_heads: int
    data: np.ndarray

    @property
    def num_columns(self) -> int:
        return int(self.data.shape[-1])


@dataclass(frozen=True)
class HeadSet:
    """Selection of (layer, head) pairs to aggregate over."""

    selection: str = "all"
    subset: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.selection not in ("all", "subset"):
            raise ValueError(f"unknown head selection {self.selection!r}")
        if self.selection == "subset":
            if not self.subset:
                raise ValueError("subset head selection must name at least one head")
            if len(set(self.subset)) != len(self.subset):
                raise ValueError("duplicate (layer, head) pair in head subset")

    @classmethod
    def all_heads(cls) -> "HeadSet":
        return cls()

    @classmethod
    def of(cls, pairs: Iterable[Sequence[int]]) -> "HeadSet":
        return cls("subset", tuple((int(l), int(h)) for l, h in pairs))


@dataclass(frozen=True)
class RankingInstance:
    """One query, its candidates, and both attention payloads."""

    query_text: str
    query_tokens: tuple[Token, ...]
    calibration_tokens: tuple[Token, ...]
    documents: tuple[Document, ...]
    attention_actual: AttentionBlock
    attention_calibration: AttentionBlock
    metadata: dict = field(default_factory=dict)

    @property
    def num_documents(self) -> int:
        return len(self.documents)

    @property
    def total_doc_tokens(self) -> int:
        return sum(len(d) for d in self.documents)

    def doc_slices(self) -> list[slice]:
        """Column ranges of each document in the concatenated token axis."""
        out, start = [], 0
        for doc in self.documents:
            out.append(slice(start, start + len(doc)))
            start += len(doc)
        return out

    @property
    def query_id(self) -> str:
        return str(self.metadata.get("query_id", "q0"))


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class Run:
    """Ordered ranking for a single query."""

    query_id: str
    entries: tuple[RunEntry, ...]

    def __post_init__(self) -> None:
        ids = [e.doc_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate doc_id in run {self.query_id!r}")
        if any(e.rank < 1 for e in self.entries):
            raise ValueError("ranks must be positive")

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def violations(self) -> list[str]:
        """Check the strict invariants expected of runs produced here."""
        out = []
        for i, e in enumerate(self.entries):
            if e.rank != i + 1:
                out.append(f"rank not consecutive at position {i}: {e.rank}")
                break
        for a, b in zip(self.entries, self.entries[1:]):
            if a.score < b.score:
                out.append(f"scores not descending at {a.doc_id}->{b.doc_id}")
                break
            if a.score == b.score and a.doc_id > b.doc_id:
                out.append(f"tie not broken by doc_id at {a.doc_id}->{b.doc_id}")
                break
        return out


def make_run(query_id: str, scores: Mapping[str, float]) -> Run:
    """Build a Run from per-document scores.

    Sorts by score descending, breaking ties by ascending doc_id so that the
    result is deterministic.
    """
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    entries = tuple(
        RunEntry(doc_id=d, score=float(s), rank=i + 1) for i, (d, s) in enumerate(ordered)
    )
    return Run(query_id=query_id, entries=entries)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _validate_block(name: str, block: AttentionBlock, n_rows: int, n_cols: int) -> list[str]:
    out = []
    if block.mode not in (PER_HEAD, AGGREGATED):
        out.append(f"{name}: unknown attention mode {block.mode!r}")
        return out
    if block.num_layers < 1 or block.num_heads < 1:
        out.append(f"{name}: layers/heads must be >= 1")
    data = block.data
    if not np.all(np.isfinite(data)):
        out.append(f"{name}: non-finite attention value")
    if block.mode == PER_HEAD:
        expect = (block.num_layers, block.num_heads, n_rows, n_cols)
        if data.ndim != 4 or data.shape != expect:
            out.append(f"{name}: shape {data.shape} != expected {expect}")
        elif data.size and (data.min() < 0.0 or data.max() > 1.0):
            out.append(f"{name}: attention out of [0,1]")
    else:
        if data.ndim != 1 or data.shape[0] != n_cols:
            out.append(f"{name}: shape {data.shape} != expected ({n_cols},)")
        elif data.size and data.min() < 0.0:
            out.append(f"{name}: aggregated score below 0")
    return out


def validate_instance(inst: RankingInstance) -> list[str]:
    """Enumerate every violated structural invariant; empty list means valid.

    Violations are data, not failures -- this function never raises.
    """
    out: list[str] = []
    if not inst.query_tokens:
        out.append("query: token list is empty")
    if not inst.calibration_tokens:
        out.append("calibration query: token list is empty")
    for label, toks in (("query", inst.query_tokens), ("calibration query", inst.calibration_tokens)):
        for t in toks:
            if not t.surface:
                out.append(f"{label}: empty token surface at index {t.index}")
            if t.normalized != normalize_token(t.surface):
                out.append(f"{label}: token {t.index} normalized form is stale")

    if inst.num_documents < 1:
        out.append("documents: need at least one candidate")
    seen: set[str] = set()
    for doc in inst.documents:
        if doc.doc_id in seen:
            out.append(f"documents: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        if not doc.tokens:
            out.append(f"document {doc.doc_id!r}: token list is empty")
        for t in doc.tokens:
            if not t.surface:
                out.append(f"document {doc.doc_id!r}: empty token surface at index {t.index}")
            if t.normalized != normalize_token(t.surface):
                out.append(f"document {doc.doc_id!r}: token {t.index} normalized form is stale")

    actual, calib = inst.attention_actual, inst.attention_calibration
    n_cols = inst.total_doc_tokens
    out += _validate_block("attention.actual", actual, len(inst.query_tokens), n_cols)
    out += _validate_block(
        "attention.calibration", calib, len(inst.calibration_tokens), n_cols
    )
    if actual.mode != calib.mode:
        out.append(f"attention: mode mismatch {actual.mode!r} vs {calib.mode!r}")
    if (actual.num_layers, actual.num_heads) != (calib.num_layers, calib.num_heads):
        out.append("attention: layer/head count mismatch between actual and calibration")
    if actual.num_columns != calib.num_columns:
        out.append("attention: column layout differs between actual and calibration")
    return out


# ---------------------------------------------------------------------------
# Dump file I/O
# ---------------------------------------------------------------------------


def _expect(mapping: Mapping, key: str, kind: type, where: str):
    if key not in mapping:
        raise SchemaError(f"{where}: missing key {key!r}")
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"{where}: key {key!r} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise SchemaError(f"{where}: key {key!r} must be {kind.__name__}")
    return value


def _surface_list(raw, where: str) -> tuple[Token, ...]:
    if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
        raise SchemaError(f"{where}: tokens must be a list of strings")
    return tokens_from_surfaces(raw)


def _attention_array(raw, mode: str, where: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: ragged or non-numeric attention payload ({exc})")
    want = 4 if mode == PER_HEAD else 1
    if arr.ndim != want:
        raise SchemaError(f"{where}: expected {want}-deep nested array, got depth {arr.ndim}")
    return arr


def instance_to_dict(inst: RankingInstance) -> dict:
    """Serialize to the dump schema.  Inverse of ``instance_from_dict``."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "query": {
            "text": inst.query_text,
            "tokens": [t.surface for t in inst.query_tokens],
        },
        "calibration_query": {"tokens": [t.surface for t in inst.calibration_tokens]},
        "documents": [
            {
                "id": d.doc_id,
                "tokens": [t.surface for t in d.tokens],
                **({"text": d.char_text} if d.char_text is not None else {}),
            }
            for d in inst.documents
        ],
        "attention": {
            "mode": inst.attention_actual.mode,
            "layers": inst.attention_actual.num_layers,
            "heads": inst.attention_actual.num_heads,
            "actual": inst.attention_actual.data.tolist(),
            "calibration": inst.attention_calibration.data.tolist(),
        },
    }
    if inst.metadata:
        payload["metadata"] = inst.metadata
    return payload


def instance_from_dict(raw: Mapping) -> RankingInstance:
    if not isinstance(raw, Mapping):
        raise SchemaError("dump: top level must be an object")
    version = _expect(raw, "schema_version", int, "dump")
    if version != SCHEMA_VERSION:
        raise VersionError(f"dump: unknown schema_version {version}")

    query = _expect(raw, "query", Mapping, "dump")
    query_text = _expect(query, "text", str, "query")
    query_tokens = _surface_list(query.get("tokens"), "query")
    calibration = _expect(raw, "calibration_query", Mapping, "dump")
    calibration_tokens = _surface_list(calibration.get("tokens"), "calibration_query")

    raw_docs = _expect(raw, "documents", list, "dump")
    documents = []
    for i, d in enumerate(raw_docs):
        if not isinstance(d, Mapping):
            raise SchemaError(f"documents[{i}]: must be an object")
        doc_id = _expect(d, "id", str, f"documents[{i}]")
        tokens = _surface_list(d.get("tokens"), f"documents[{i}]")
        text = d.get("text")
        if text is not None and not isinstance(text, str):
            raise SchemaError(f"documents[{i}]: text must be a string")
        documents.append(Document(doc_id=doc_id, tokens=tokens, char_text=text))

    att = _expect(raw, "attention", Mapping, "dump")
    mode = _expect(att, "mode", str, "attention")
    if mode not in (PER_HEAD, AGGREGATED):
        raise SchemaError(f"attention: unknown mode {mode!r}")
    layers = _expect(att, "layers", int, "attention")
    heads = _expect(att, "heads", int, "attention")
    actual = _attention_array(att.get("actual"), mode, "attention.actual")
    calib = _attention_array(att.get("calibration"), mode, "attention.calibration")

    metadata = raw.get("metadata", {})
    if not isinstance(metadata, Mapping):
        raise SchemaError("metadata: must be an object")

    inst = RankingInstance(
        query_text=query_text,
        query_tokens=query_tokens,
        calibration_tokens=calibration_tokens,
        documents=tuple(documents),
        attention_actual=AttentionBlock(mode, layers, heads, actual),
        attention_calibration=AttentionBlock(mode, layers, heads, calib),
        metadata=dict(metadata),
    )
    report = validate_instance(inst)
    if report:
        raise SchemaError("; ".join(report))
    return inst


def load_instance(path: str | Path) -> RankingInstance:
    """Load and validate a dump file.

    Raises ParseError for malformed JSON, VersionError for an unknown
    schema_version, SchemaError for anything structurally invalid, and
    OSError if the file cannot be read.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        return instance_from_dict(raw)
    except SchemaError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_instance(inst: RankingInstance, path: str | Path) -> None:
    _atomic_write_text(path, json.dumps(instance_to_dict(inst), sort_keys=True))


# ---------------------------------------------------------------------------
# Run file I/O
# ---------------------------------------------------------------------------


def _run_to_dict(run: Run) -> dict:
    return {
        "query_id": run.query_id,
        "entries": [
            {"doc_id": e.doc_id, "score": e.score, "rank": e.rank} for e in run.entries
        ],
    }


def _run_from_dict(raw: Mapping) -> Run:
    query_id = _expect(raw, "query_id", str, "run")
    entries = _expect(raw, "entries", list, "run")
    parsed = []
    for i, e in enumerate(entries):
        if not isinstance(e, Mapping):
            raise SchemaError(f"run entries[{i}]: must be an object")
        parsed.append(
            RunEntry(
                doc_id=_expect(e, "doc_id", str, f"entries[{i}]"),
                score=_expect(e, "score", float, f"entries[{i}]"),
                rank=_expect(e, "rank", int, f"entries[{i}]"),
            )
        )
    return Run(query_id=query_id, entries=tuple(parsed))


def save_runs(
    runs: Sequence[Run], path: str | Path, format: str = "trec", tag: str = "reattn"
) -> None:
    """Write one or more runs.

    ``trec`` emits one `<query_id> Q0 <doc_id> <rank> <score> <tag>` line per
    entry with the score fixed to 6 decimal places; ``json`` round-trips
    losslessly (a single run is saved as one object, several as an array).
    """
    if format not in RUN_FORMATS:
        raise ValueError(f"unknown run format {format!r}")
    for run in runs:
        bad = run.violations()
        if bad:
            raise ValueError(f"run {run.query_id!r} invalid: {'; '.join(bad)}")
    if format == "trec":
        lines = [
            f"{run.query_id} Q0 {e.doc_id} {e.rank} {e.score:.6f} {tag}"
            for run in runs
            for e in run.entries
        ]
        _atomic_write_text(path, "".join(line + "\n" for line in lines))
    else:
        payload = _run_to_dict(runs[0]) if len(runs) == 1 else [_run_to_dict(r) for r in runs]
        _atomic_write_text(path, json.dumps(payload, sort_keys=True))


def save_run(run: Run, path: str | Path, format: str = "trec", tag: str = "reattn") -> None:
    save_runs([run], path, format=format, tag=tag)


def load_runs(path: str | Path, format: str = "auto") -> list[Run]:
    """Read a run file into one Run per query, ordered by query_id.

    ``auto`` sniffs JSON by its leading character.  TREC input is grouped by
    query and ordered by the rank column; externally produced files are
    accepted as-is (their score ordering is not re-checked).
    """
    text = Path(path).read_text(encoding="utf-8")
    if format == "auto":
        head = text.lstrip()[:1]
        format = "json" if head in ("{", "[") else "trec"
    if format == "json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        items = raw if isinstance(raw, list) else [raw]
        return sorted((_run_from_dict(r) for r in items), key=lambda r: r.query_id)
    if format != "trec":
        raise ValueError(f"unknown run format {format!r}")

    by_query: dict[str, list[RunEntry]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 6:
            raise ParseError(f"{path}:{lineno}: expected 6 whitespace-separated fields")
        qid, _, doc_id, rank, score = parts[0], parts[1], parts[2], parts[3], parts[4]
        try:
            entry = RunEntry(doc_id=doc_id, score=float(score), rank=int(rank))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        by_query.setdefault(qid, []).append(entry)
    runs = []
    for qid in sorted(by_query):
        entries = tuple(sorted(by_query[qid], key=lambda e: e.rank))
        runs.append(Run(query_id=qid, entries=entries))
    return runs

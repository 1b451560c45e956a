"""Run the two forward passes and write the attention dump.

The actual pass uses the job's query; the calibration pass re-renders the
same prompt with the content-free query "N/A".  Attention is sliced from the
query-token rows to the document-token columns of every (layer, head),
exported at full float64 precision, and written as a schema-version-1 dump.
Inference is greedy-free and seedless, so extraction is reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .job import (
    AGGREGATED,
    PER_HEAD,
    CaptureError,
    ContextOverflow,
    ExtractionJob,
    ModelLoadError,
)
from .prompting import PromptLayout, build_prompt

CALIBRATION_QUERY = "N/A"


def load_model(model_id: str):
    """Load a causal LM and its tokenizer with attention outputs enabled."""
    try:
        import torch  # noqa: F401  (fail here, loudly, if torch is broken)
        from transformers import AutoModelForCausalLM, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForCausalLM.from_pretrained(
            model_id, attn_implementation="eager"
        )
    except Exception as exc:
        raise ModelLoadError(f"cannot load model {model_id!r}: {exc}") from exc
    model.eval()
    return model, tokenizer


def _context_length(model) -> int | None:
    for name in ("n_positions", "max_position_embeddings"):
        value = getattr(model.config, name, None)
        if isinstance(value, int) and value > 0:
            return value
    return None


def _attention_stack(model, input_ids: tuple[int, ...]) -> np.ndarray:
    """Forward pass returning attention as float64 (L, H, seq, seq)."""
    import torch

    with torch.no_grad():
        out = model(torch.tensor([list(input_ids)]), output_attentions=True)
    attentions = getattr(out, "attentions", None)
    if not attentions:
        raise CaptureError("model exposes no attention weights")
    stacked = np.stack([a[0].double().numpy() for a in attentions])
    return stacked


def _slice_rows_cols(stack: np.ndarray, rows: range, cols: np.ndarray) -> np.ndarray:
    return stack[:, :, rows.start : rows.stop, :][:, :, :, cols]


def _resolve_mask(job: ExtractionJob, n_layers: int, n_heads: int) -> list[tuple[int, int]]:
    if job.head_mask is None:
        return [(l, h) for l in range(n_layers) for h in range(n_heads)]
    for l, h in job.head_mask:
        if not (0 <= l < n_layers and 0 <= h < n_heads):
            raise ValueError(
                f"head mask entry ({l},{h}) out of range for "
                f"{n_layers} layers x {n_heads} heads"
            )
    return [(int(l), int(h)) for l, h in job.head_mask]


def _aggregate(sliced: np.ndarray, pairs, query_len: int) -> np.ndarray:
    total = np.zeros(sliced.shape[-1])
    for l, h in pairs:
        total += sliced[l, h].sum(axis=0)
    return total / query_len


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def extract_attention(job: ExtractionJob) -> dict:
    """Produce the dump payload for a job; write it when out_path is set."""
    model, tokenizer = load_model(job.model)
    max_length = _context_length(model)
    actual_layout = build_prompt(job, tokenizer, max_length=max_length)
    calib_layout = build_prompt(
        job, tokenizer, query_text=CALIBRATION_QUERY, max_length=max_length
    )
    if actual_layout.doc_spans != calib_layout.doc_spans:
        raise CaptureError("document spans differ between actual and calibration prompts")

    actual_stack = _attention_stack(model, actual_layout.input_ids)
    calib_stack = _attention_stack(model, calib_layout.input_ids)
    n_layers, n_heads = actual_stack.shape[0], actual_stack.shape[1]

    doc_cols = np.concatenate(
        [np.arange(start, end) for start, end in actual_layout.doc_spans]
    )
    q_rows = range(*actual_layout.query_span)
    c_rows = range(*calib_layout.query_span)
    actual_sliced = _slice_rows_cols(actual_stack, q_rows, doc_cols)
    calib_sliced = _slice_rows_cols(calib_stack, c_rows, doc_cols)

    if job.mode == PER_HEAD:
        attention = {
            "mode": PER_HEAD,
            "layers": n_layers,
            "heads": n_heads,
            "actual": actual_sliced.tolist(),
            "calibration": calib_sliced.tolist(),
        }
    else:
        pairs = _resolve_mask(job, n_layers, n_heads)
        attention = {
            "mode": AGGREGATED,
            "layers": n_layers,
            "heads": n_heads,
            "actual": _aggregate(actual_sliced, pairs, len(q_rows)).tolist(),
            "calibration": _aggregate(calib_sliced, pairs, len(c_rows)).tolist(),
        }

    payload = {
        "schema_version": 1,
        "query": {"text": job.query, "tokens": list(actual_layout.query_tokens())},
        "calibration_query": {"tokens": list(calib_layout.query_tokens())},
        "documents": [
            {
                "id": doc.doc_id,
                "tokens": list(actual_layout.doc_tokens(i)),
                "text": doc.text,
            }
            for i, doc in enumerate(job.documents)
        ],
        "attention": attention,
        "metadata": {
            "query_id": job.query_id,
            "model": job.model,
            "capture_mode": job.mode,
            "head_mask": None if job.head_mask is None else [list(p) for p in job.head_mask],
            "prompt_sha256": hashlib.sha256(actual_layout.text.encode()).hexdigest(),
        },
    }
    if job.out_path is not None:
        _atomic_write(job.out_path, json.dumps(payload, sort_keys=True))
    return payload

"""Acceptance checks for the extraction bridge.

Runs a tiny fully local open-weight model (a few 10^4 parameters, far under
the 100M budget), and checks the four release criteria: dumps validate,
extraction is byte-identical across runs, aggregated capture matches the
re-ranker's own aggregation of the per-head dump to 1e-6, and document
spans tile the document bodies exactly.
"""

import dataclasses

import numpy as np
from transformers import AutoTokenizer

from attn_extract import build_prompt, extract_attention, load_model

from reattn import (
    HeadSet,
    aggregate_token_scores,
    instance_from_dict,
    validate_instance,
)


def test_criterion_model_is_tiny(tiny_model_dir):
    model, _ = load_model(tiny_model_dir)
    n_params = sum(p.numel() for p in model.parameters())
    assert n_params <= 100_000_000
    print(f"\nACCEPTANCE PASS: extraction model has {n_params:,} parameters (<= 100M)")


def test_criterion_dump_validates(job, tmp_path):
    out = tmp_path / "dump.json"
    extract_attention(dataclasses.replace(job, out_path=str(out)))
    from reattn import load_instance

    inst = load_instance(out)  # raises on any schema violation
    assert validate_instance(inst) == []
    print("\nACCEPTANCE PASS: extracted dump passes instance validation")


def test_criterion_repeated_extraction_byte_identical(job, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    extract_attention(dataclasses.replace(job, out_path=str(a)))
    extract_attention(dataclasses.replace(job, out_path=str(b)))
    assert a.read_bytes() == b.read_bytes()
    print("\nACCEPTANCE PASS: repeated extraction is byte-identical")


def test_criterion_aggregated_matches_pipeline_aggregation(job):
    per_head = instance_from_dict(extract_attention(job))
    for mask, heads in (
        (None, HeadSet.all_heads()),
        (((0, 0), (1, 1)), HeadSet.of([(0, 0), (1, 1)])),
    ):
        aggregated = extract_attention(
            dataclasses.replace(job, mode="aggregated", head_mask=mask)
        )
        ours = np.asarray(aggregated["attention"]["actual"])
        theirs = aggregate_token_scores(
            per_head.attention_actual, len(per_head.query_tokens), heads
        )
        np.testing.assert_allclose(ours, theirs, atol=1e-6, rtol=0)
        ours_cal = np.asarray(aggregated["attention"]["calibration"])
        theirs_cal = aggregate_token_scores(
            per_head.attention_calibration, len(per_head.calibration_tokens), heads
        )
        np.testing.assert_allclose(ours_cal, theirs_cal, atol=1e-6, rtol=0)
    print(
        "\nACCEPTANCE PASS: aggregated capture matches pipeline aggregation "
        "of the per-head dump (full mask and subset) within 1e-6"
    )


def test_criterion_spans_tile_documents(job, tiny_model_dir):
    tokenizer = AutoTokenizer.from_pretrained(tiny_model_dir)
    layout = build_prompt(job, tokenizer)
    for i, doc in enumerate(job.documents):
        start, end = layout.doc_spans[i]
        standalone = tokenizer(doc.text, add_special_tokens=False).input_ids
        assert list(layout.input_ids[start:end]) == standalone
    payload = extract_attention(job)
    for i, doc in enumerate(payload["documents"]):
        assert tuple(doc["tokens"]) == layout.doc_tokens(i)
    print("\nACCEPTANCE PASS: document spans tile document bodies exactly")

"""Command-line extraction: model + query + documents -> dump file.

Exit codes follow the re-ranker's contract: 0 success, 1 invalid input
(bad document schema, head mask out of range, prompt over the context
limit), 2 I/O or model-loading failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .capture import extract_attention
from .job import (
    AGGREGATED,
    PER_HEAD,
    CaptureError,
    ContextOverflow,
    ExtractionJob,
    ModelLoadError,
    SourceDocument,
)

log = logging.getLogger(__name__)


def _read_documents(path: str) -> tuple[SourceDocument, ...]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError(f"{path}: docs file must be a JSON array")
    docs = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "id" not in item or "text" not in item:
            raise ValueError(f"{path}: document {i} needs 'id' and 'text'")
        docs.append(
            SourceDocument(
                doc_id=str(item["id"]),
                text=str(item["text"]),
                title=item.get("title"),
            )
        )
    return tuple(docs)


def _read_head_mask(path: str | None):
    if path is None:
        return None
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list) or not all(
        isinstance(p, list) and len(p) == 2 for p in raw
    ):
        raise ValueError(f"{path}: head mask must be a list of [layer, head] pairs")
    return tuple((int(l), int(h)) for l, h in raw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attn-extract", description=__doc__)
    parser.add_argument("--model", required=True, help="model id or local checkpoint dir")
    parser.add_argument("--query-file", required=True, help="plain-text file with the query")
    parser.add_argument("--docs-file", required=True,
                        help="JSON array of {id, text, title?} objects")
    parser.add_argument("--mode", choices=(PER_HEAD, AGGREGATED), default=PER_HEAD)
    parser.add_argument("--heads", help="JSON [layer, head] pairs (aggregated mode only)")
    parser.add_argument("--out", required=True, help="dump file to write")
    parser.add_argument("--prompt-prefix", default="")
    parser.add_argument("--prompt-suffix", default="")
    parser.add_argument("--query-id", default=None,
                        help="query id recorded in the dump (default: query file stem)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        query = Path(args.query_file).read_text(encoding="utf-8").strip()
        job = ExtractionJob(
            model=args.model,
            query=query,
            documents=_read_documents(args.docs_file),
            mode=args.mode,
            head_mask=_read_head_mask(args.heads),
            prompt_prefix=args.prompt_prefix,
            prompt_suffix=args.prompt_suffix,
            query_id=args.query_id or Path(args.query_file).stem,
            out_path=args.out,
        )
        extract_attention(job)
    except (OSError, json.JSONDecodeError, ModelLoadError) as exc:
        print(f"attn-extract: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ContextOverflow, CaptureError) as exc:
        print(f"attn-extract: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %s", args.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

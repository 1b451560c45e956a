"""Token normalization and lexical matching over a candidate document set.

Matching operates on individual tokenizer tokens: a document token counts as
a query match when its normalized form equals the normalized form of some
query token.  Word reassembly is deliberately out of scope -- the scoring
formulas are defined on tokenizer tokens, and stitching subwords back into
words would drag in tokenizer-specific heuristics.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:  # pragma: no cover - import only for annotations
    from .core import Document, Token

# Leading markers emitted by common subword tokenizers (GPT-2 style "Ġ",
# SentencePiece "▁") plus ordinary whitespace.
_LEADING_MARKERS = "Ġ▁ \t\n\r"


def normalize_token(surface: str) -> str:
    """Map a token surface to its canonical matching form.

    Strips leading subword/whitespace markers, then applies Unicode case
    folding.  A token left without any alphanumeric character normalizes to
    the empty string and never matches anything; attention on punctuation is
    model bias, not lexical evidence, so such tokens get no weight of their
    own.  Idempotent: normalizing an already-normalized form is a no-op.
    """
    stripped = surface.lstrip(_LEADING_MARKERS).casefold()
    if not any(ch.isalnum() for ch in stripped):
        return ""
    return stripped


def query_membership(
    documents: Sequence["Document"], query_tokens: Sequence["Token"]
) -> list[list[bool]]:
    """Flag, per document token, whether it lexically matches a query token.

    Returns one boolean list per document, aligned with that document's
    tokens.  Neutralized tokens (empty normalized form) are never members,
    on either side.
    """
    query_forms = {t.normalized for t in query_tokens if t.normalized}
    return [
        [bool(t.normalized) and t.normalized in query_forms for t in doc.tokens]
        for doc in documents
    ]


def document_frequency(
    documents: Sequence["Document"], query_tokens: Sequence["Token"]
) -> dict[str, int]:
    """Count, for each distinct normalized query token, how many documents
    contain it.

    Counts distinct documents, not occurrences.  Tokens absent from every
    document appear with a count of 0; neutralized query tokens are skipped.
    """
    doc_vocab = [{t.normalized for t in doc.tokens if t.normalized} for doc in documents]
    table: dict[str, int] = {}
    for token in query_tokens:
        form = token.normalized
        if not form or form in table:
            continue
        table[form] = sum(1 for vocab in doc_vocab if form in vocab)
    return table

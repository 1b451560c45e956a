"""Listwise prompt construction with exact token bookkeeping.

The prompt lists the candidate paragraphs under numbered identifiers, asks
the model to find material relevant to the query, then states the query:

    {prefix} Here are some paragraphs:

    [1] {title, if any}
    {paragraph text}

    ...

    Please find information that is relevant to the following query in the
    paragraphs above.

    Query: {query}{suffix}

Each segment is tokenized on its own and the ids concatenated, so the token
ranges of every document body and of the query are known exactly -- template
text and the "[i]" identifiers never leak into a document span, and the
spans reproduce each body's standalone tokenization by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .job import ContextOverflow, ExtractionJob

INSTRUCTION = (
    "Please find information that is relevant to the following query "
    "in the paragraphs above.\n\n"
)


@dataclass(frozen=True)
class PromptLayout:
    """A tokenized prompt plus where everything lives in it."""

    text: str
    input_ids: tuple[int, ...]
    tokens: tuple[str, ...]
    doc_spans: tuple[tuple[int, int], ...]
    query_span: tuple[int, int]

    def doc_tokens(self, index: int) -> tuple[str, ...]:
        start, end = self.doc_spans[index]
        return self.tokens[start:end]

    def query_tokens(self) -> tuple[str, ...]:
        start, end = self.query_span
        return self.tokens[start:end]


def build_prompt(
    job: ExtractionJob,
    tokenizer,
    query_text: str | None = None,
    max_length: int | None = None,
) -> PromptLayout:
    """Assemble the prompt and locate every document and the query in it.

    ``query_text`` overrides the job's query (used for the calibration pass;
    everything before the query is unchanged, so document spans are
    identical between the two layouts).  Raises ContextOverflow when the
    result exceeds ``max_length`` tokens.
    """
    query = job.query if query_text is None else query_text
    segments: list[tuple[str | None, str]] = []
    intro = "Here are some paragraphs:\n\n"
    if job.prompt_prefix:
        intro = job.prompt_prefix + " " + intro
    segments.append((None, intro))
    for i, doc in enumerate(job.documents, start=1):
        header = f"[{i}] "
        if doc.title:
            header += doc.title + "\n"
        segments.append((None, header))
        segments.append((f"doc{i - 1}", doc.text))
        segments.append((None, "\n\n"))
    segments.append((None, INSTRUCTION))
    segments.append((None, "Query: "))
    segments.append(("query", query))
    if job.prompt_suffix:
        segments.append((None, job.prompt_suffix))

    ids: list[int] = []
    tokens: list[str] = []
    doc_spans: list[tuple[int, int]] = [(0, 0)] * len(job.documents)
    query_span = (0, 0)
    for label, text in segments:
        seg_ids = tokenizer(text, add_special_tokens=False).input_ids
        start = len(ids)
        ids.extend(seg_ids)
        tokens.extend(tokenizer.convert_ids_to_tokens(seg_ids))
        span = (start, len(ids))
        if label == "query":
            query_span = span
        elif label is not None:
            doc_spans[int(label[3:])] = span

    for doc, (start, end) in zip(job.documents, doc_spans):
        if end <= start:
            raise ValueError(f"document {doc.doc_id!r} tokenizes to zero tokens")
    if query_span[1] <= query_span[0]:
        raise ValueError("query tokenizes to zero tokens")
    if max_length is not None and len(ids) > max_length:
        raise ContextOverflow(
            f"prompt needs {len(ids)} tokens but the model context is {max_length}"
        )
    return PromptLayout(
        text="".join(text for _, text in segments),
        input_ids=tuple(ids),
        tokens=tuple(tokens),
        doc_spans=tuple(doc_spans),
        query_span=query_span,
    )

"""A seeded, fully local miniature language model for offline use.

Builds a word-level tokenizer and a randomly initialized two-layer GPT-2
style model (a few tens of thousands of parameters), saved in standard
transformers format so ``attn-extract --model <dir>`` can load it like any
hub checkpoint.  Weights are deterministic in the seed, which makes whole
extraction runs reproducible end to end; this stands in for a real
open-weight checkpoint wherever downloading one is impossible.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

TEMPLATE_WORDS = (
    "Here are some paragraphs Please find information that is relevant to "
    "the following query in above Query N A".split()
)
PUNCTUATION = ("[", "]", ":", ".", ",", "/", "?", "!")


def build_tiny_model(
    target_dir: str | Path,
    extra_words: Iterable[str] = (),
    seed: int = 0,
    n_layers: int = 2,
    n_heads: int = 2,
    hidden_size: int = 32,
    context_length: int = 256,
) -> str:
    """Create the model + tokenizer under ``target_dir`` and return the path."""
    import torch
    from tokenizers import Tokenizer, models, pre_tokenizers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    vocab: dict[str, int] = {"[UNK]": 0}
    for word in (*TEMPLATE_WORDS, *PUNCTUATION, *(str(i) for i in range(1, 33)), *extra_words):
        vocab.setdefault(word, len(vocab))

    word_level = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    word_level.pre_tokenizer = pre_tokenizers.Whitespace()
    tokenizer = PreTrainedTokenizerFast(tokenizer_object=word_level, unk_token="[UNK]")

    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=context_length,
        n_embd=hidden_size,
        n_layer=n_layers,
        n_head=n_heads,
        bos_token_id=None,
        eos_token_id=None,
    )
    model = GPT2LMHeadModel(config)
    model.eval()

    target = Path(target_dir)
    target.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(target)
    tokenizer.save_pretrained(target)
    return str(target)

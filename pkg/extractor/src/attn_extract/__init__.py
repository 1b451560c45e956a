"""Bridge real transformer checkpoints to re-ranking dump files.

Builds the listwise prompt with exact token spans for every document and
the query, runs actual and calibration forward passes with attention
capture, and writes per-head or pre-aggregated dumps the re-ranking engine
consumes through its file contract.
"""

__version__ = "0.1.0"

from .capture import CALIBRATION_QUERY, extract_attention, load_model
from .job import (
    AGGREGATED,
    PER_HEAD,
    CaptureError,
    ContextOverflow,
    ExtractionJob,
    ModelLoadError,
    SourceDocument,
)
from .prompting import PromptLayout, build_prompt
from .tinymodel import build_tiny_model

"""Toolkit for building and evaluating instruction-driven text-edit benchmarks.

Core pieces: a structured diff engine with character-level inline changes,
BLEU/ROUGE-L scoring, a provider-agnostic LLM client with deterministic
transcript replay, category-aware corpus ingestion, instruction generation,
chunked and multi-turn edit application, diff-based judge filtering, and an
evaluation harness — all wired together by the ``instredit`` CLI.
"""

__version__ = "0.1.0"

from instredit.diffs import (
    ChangeKind,
    ChangeOp,
    DiffScript,
    LineDiff,
    LineKind,
    MismatchError,
    apply_diff,
    categorize_counts,
    compute_diff,
    render_diff,
)
from instredit.metrics import (
    MetricReport,
    MetricScore,
    aggregate,
    bleu,
    rouge_l,
    tokenize,
)
from instredit.providers import (
    GenerationSettings,
    Provider,
    ProviderError,
    ReplayMissError,
    Transcript,
    complete_many,
)
from instredit.records import Category, EditRecord, read_records, write_records

__all__ = [
    "Category",
    "ChangeKind",
    "ChangeOp",
    "DiffScript",
    "EditRecord",
    "GenerationSettings",
    "LineDiff",
    "LineKind",
    "MetricReport",
    "MetricScore",
    "MismatchError",
    "Provider",
    "ProviderError",
    "ReplayMissError",
    "Transcript",
    "aggregate",
    "apply_diff",
    "bleu",
    "categorize_counts",
    "complete_many",
    "compute_diff",
    "read_records",
    "render_diff",
    "rouge_l",
    "tokenize",
    "write_records",
]

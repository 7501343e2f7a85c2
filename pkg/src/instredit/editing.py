"""Applying edit instructions through a provider: chunking and multi-turn.

Long originals are partitioned into token-budgeted chunks that snap to line
breaks; every chunk is sent with the same instruction and the outputs are
concatenated in chunk order. Multi-turn tasks apply each instruction to the
output of the previous one, keeping all intermediate outputs for audit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from instredit.metrics import tokenize
from instredit.providers import (
    GenerationSettings,
    Provider,
    ProviderError,
    complete_many,
)
from instredit.records import EditRecord
from instredit.templates import load_text_template, parse_edit_requests

DEFAULT_MAX_CHUNK_TOKENS = 2048

TokenEstimator = Callable[[str], int]


class OversizeLineError(Exception):
    """A single line exceeds the chunk budget (strict mode only)."""


class EmptyOutputError(Exception):
    """The provider returned empty text for a nonempty chunk."""


class TurnError(Exception):
    """A turn of a multi-turn task failed; carries the 0-based turn index."""

    def __init__(self, turn_index: int, cause: Exception):
        self.turn_index = turn_index
        super().__init__(f"turn {turn_index + 1} failed: {cause}")


def estimate_tokens(text: str) -> int:
    """Default token estimator: whitespace token count."""
    return len(tokenize(text))


@dataclass(frozen=True)
class ChunkPlan:
    """Contiguous, non-overlapping (start, end) offsets covering the text.

    ``oversize_line_split`` flags that some line alone exceeded the budget
    and had to be split at character granularity.
    """

    boundaries: tuple[tuple[int, int], ...]
    max_tokens: int
    oversize_line_split: bool = False

    def slices(self, text: str) -> list[str]:
        return [text[start:end] for start, end in self.boundaries]

    def __len__(self) -> int:
        return len(self.boundaries)


@dataclass(frozen=True)
class MultiTurnTask:
    """An ordered sequence of at least two instructions for one record."""

    record_id: str
    instructions: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.instructions) < 2:
            raise ValueError("a multi-turn task needs at least 2 instructions")
        if not all(self.instructions):
            raise ValueError("instructions must be nonempty")


@dataclass(frozen=True)
class MultiTurnResult:
    """Output after every turn; the last entry is the final text."""

    turns: tuple[str, ...]

    @property
    def final(self) -> str:
        return self.turns[-1]


def _line_spans(text: str) -> list[tuple[int, int]]:
    """Offsets of each line including its trailing newline."""
    spans: list[tuple[int, int]] = []
    start = 0
    while start < len(text):
        end = text.find("\n", start)
        end = len(text) if end < 0 else end + 1
        spans.append((start, end))
        start = end
    return spans


def _split_long_segment(
    text: str, start: int, end: int, max_tokens: int, estimator: TokenEstimator
) -> list[tuple[int, int]]:
    """Character-granularity split of one oversize line."""
    pieces: list[tuple[int, int]] = []
    position = start
    while position < end:
        lo, hi = 1, end - position
        # Largest prefix whose estimate fits; token counts are monotone in
        # prefix length, so binary search applies.
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if estimator(text[position : position + mid]) <= max_tokens:
                lo = mid
            else:
                hi = mid - 1
        pieces.append((position, position + lo))
        position += lo
    return pieces


def plan_chunks(
    text: str,
    max_tokens: int = DEFAULT_MAX_CHUNK_TOKENS,
    estimator: TokenEstimator | None = None,
    strict: bool = False,
) -> ChunkPlan:
    """Partition a text into chunks of at most ``max_tokens`` estimate each.

    Boundaries fall on line breaks whenever possible; a single line that
    alone exceeds the budget is split at character granularity and the plan
    is flagged (or OversizeLineError is raised with ``strict``). A text that
    fits the budget yields one chunk.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    estimator = estimator or estimate_tokens
    if not text or estimator(text) <= max_tokens:
        return ChunkPlan(((0, len(text)),), max_tokens)

    boundaries: list[tuple[int, int]] = []
    oversize = False
    chunk_start: int | None = None
    chunk_end = 0
    for start, end in _line_spans(text):
        if chunk_start is not None and estimator(text[chunk_start:end]) <= max_tokens:
            chunk_end = end
            continue
        if chunk_start is not None:
            boundaries.append((chunk_start, chunk_end))
            chunk_start = None
        if estimator(text[start:end]) <= max_tokens:
            chunk_start, chunk_end = start, end
        else:
            if strict:
                raise OversizeLineError(
                    f"line at offset {start} exceeds the budget of {max_tokens}"
                )
            oversize = True
            boundaries.extend(
                _split_long_segment(text, start, end, max_tokens, estimator)
            )
    if chunk_start is not None:
        boundaries.append((chunk_start, chunk_end))
    return ChunkPlan(tuple(boundaries), max_tokens, oversize)


def render_editing_prompt(
    content: str, instruction: str, templates_dir: str | Path | None = None
) -> str:
    body = load_text_template("editing", templates_dir)
    return body.replace("{content}", content).replace("{instruction}", instruction)


def apply_edit(
    original: str,
    instruction: str,
    provider: Provider,
    settings: GenerationSettings | None = None,
    *,
    max_chunk_tokens: int = DEFAULT_MAX_CHUNK_TOKENS,
    estimator: TokenEstimator | None = None,
    templates_dir: str | Path | None = None,
    jobs: int = 1,
) -> str:
    """Apply one instruction to a text through the provider.

    Every chunk is paired with the same instruction; chunk outputs are
    concatenated in order and returned verbatim, with no post-processing.
    """
    if not instruction:
        raise ValueError("instruction must be nonempty")
    plan = plan_chunks(original, max_chunk_tokens, estimator)
    chunks = plan.slices(original)
    prompts = [
        render_editing_prompt(chunk, instruction, templates_dir) for chunk in chunks
    ]

    if jobs > 1 and len(prompts) > 1:
        results = complete_many(provider, prompts, settings, concurrency_limit=jobs)
    else:
        results = []
        for prompt in prompts:
            try:
                results.append(provider.complete(prompt, settings))
            except ProviderError as exc:
                results.append(exc)
                break

    outputs: list[str] = []
    for index, result in enumerate(results):
        if isinstance(result, Exception):
            raise type(result)(
                f"chunk {index + 1}/{len(prompts)}: {result}"
            ) from result
        if not result and chunks[index]:
            raise EmptyOutputError(
                f"chunk {index + 1}/{len(prompts)} returned empty text"
            )
        outputs.append(result)
    return "".join(outputs)


def generate_turn_sequence(
    record: EditRecord,
    turn_count: int,
    provider: Provider,
    settings: GenerationSettings | None = None,
    templates_dir: str | Path | None = None,
) -> MultiTurnTask:
    """Ask the provider for ``turn_count`` non-contradictory edit requests."""
    if turn_count < 2:
        raise ValueError("turn_count must be >= 2")
    body = load_text_template("multiturn", templates_dir)
    prompt = body.replace("{count}", str(turn_count)).replace(
        "{content}", record.original
    )
    output = provider.complete(prompt, settings)
    instructions = parse_edit_requests(output, turn_count)
    return MultiTurnTask(record_id=record.id, instructions=tuple(instructions))


def apply_multi_turn(
    original: str,
    task: MultiTurnTask,
    provider: Provider,
    settings: GenerationSettings | None = None,
    *,
    max_chunk_tokens: int = DEFAULT_MAX_CHUNK_TOKENS,
    estimator: TokenEstimator | None = None,
    templates_dir: str | Path | None = None,
    jobs: int = 1,
) -> MultiTurnResult:
    """Apply the task's instructions cumulatively, each to the previous output."""
    turns: list[str] = []
    current = original
    for index, instruction in enumerate(task.instructions):
        try:
            current = apply_edit(
                current,
                instruction,
                provider,
                settings,
                max_chunk_tokens=max_chunk_tokens,
                estimator=estimator,
                templates_dir=templates_dir,
                jobs=jobs,
            )
        except Exception as exc:
            raise TurnError(index, exc) from exc
        turns.append(current)
    return MultiTurnResult(turns=tuple(turns))

"""Benchmark records: ingestion from raw sources, JSONL persistence, splits."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class SourceFormatError(Exception):
    """Raised when a source file cannot be decoded as UTF-8."""


class EmptySourceError(Exception):
    """Raised when the sources yield no usable records."""


class SchemaError(Exception):
    """Raised on malformed persisted records; carries the offending line."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class InsufficientDataError(Exception):
    """Raised when a category is too small to split."""


class Category(str, Enum):
    WIKI = "wiki"
    CODE = "code"
    DSL = "dsl"
    LATEX = "latex"


@dataclass
class EditRecord:
    """One benchmark unit.

    ``edit_requests`` is empty right after ingestion and gains one entry per
    generated instruction (several for multi-turn records). ``edited`` is the
    final output after applying all requests; ``diff`` its rendered diff
    against ``original``; ``g_score`` the judge's 1-10 coherence score.
    """

    id: str
    category: Category
    original: str
    edit_requests: list[str] = field(default_factory=list)
    edited: str | None = None
    diff: str | None = None
    g_score: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be nonempty")
        if not self.original:
            raise ValueError("record original must be nonempty")
        if self.g_score is not None and not 1 <= self.g_score <= 10:
            raise ValueError("g_score must be in [1, 10]")

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category.value,
            "original": self.original,
            "edit_requests": list(self.edit_requests),
            "edited": self.edited,
            "diff": self.diff,
            "g_score": self.g_score,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "EditRecord":
        return cls(
            id=data["id"],
            category=Category(data["category"]),
            original=data["original"],
            edit_requests=list(data["edit_requests"]),
            edited=data.get("edited"),
            diff=data.get("diff"),
            g_score=data.get("g_score"),
        )


_REQUIRED_FIELDS = {
    "id": str,
    "category": str,
    "original": str,
    "edit_requests": list,
}
_CATEGORY_VALUES = {c.value for c in Category}


def write_records(records: Iterable[EditRecord], path: str | Path) -> None:
    """Write records as JSONL, one record per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False))
            handle.write("\n")


def read_records(path: str | Path) -> list[EditRecord]:
    """Read a JSONL records file, validating each line against the schema."""
    records: list[EditRecord] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line_number) from exc
            if not isinstance(data, dict):
                raise SchemaError("record must be a JSON object", line_number)
            for name, expected in _REQUIRED_FIELDS.items():
                if name not in data:
                    raise SchemaError(f"missing field {name!r}", line_number)
                if not isinstance(data[name], expected):
                    raise SchemaError(
                        f"field {name!r} must be {expected.__name__}", line_number
                    )
            if data["category"] not in _CATEGORY_VALUES:
                raise SchemaError(
                    f"unknown category {data['category']!r}", line_number
                )
            if not all(isinstance(item, str) for item in data["edit_requests"]):
                raise SchemaError("edit_requests must hold strings", line_number)
            g_score = data.get("g_score")
            if g_score is not None and (
                not isinstance(g_score, int) or not 1 <= g_score <= 10
            ):
                raise SchemaError("g_score must be an integer in [1, 10]", line_number)
            for name in ("edited", "diff"):
                value = data.get(name)
                if value is not None and not isinstance(value, str):
                    raise SchemaError(f"field {name!r} must be string or null", line_number)
            try:
                records.append(EditRecord.from_json_dict(data))
            except ValueError as exc:
                raise SchemaError(str(exc), line_number) from exc
    return records


def verify_diff_consistency(record: EditRecord) -> bool:
    """True when the stored diff matches a recomputed diff of the record and
    replaying that diff reproduces the stored edited text."""
    from instredit.diffs import apply_diff, compute_diff, render_diff

    if record.edited is None or record.diff is None:
        return False
    script = compute_diff(record.original, record.edited)
    return (
        render_diff(script) == record.diff
        and apply_diff(record.original, script) == record.edited
    )


# --------------------------------------------------------------------------
# Ingestion


@dataclass(frozen=True)
class SamplingConfig:
    """Deterministic sampling knobs for ingestion.

    Token bounds apply to segment-sampled categories (wiki); segment count
    ranges control how many pieces are concatenated per code/latex record.
    """

    seed: int
    min_tokens: int = 200
    max_tokens: int = 2000
    max_records: int | None = None
    code_segments: tuple[int, int] = (2, 5)
    latex_sections: tuple[int, int] = (2, 4)


_WIKI_HEADER = re.compile(r"^\s*=+[^=\n]+=+\s*$", re.MULTILINE)
_LATEX_SECTION = re.compile(r"\\(?:sub)*section\*?\{")


def _read_utf8(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SourceFormatError(f"{path}: not valid UTF-8 ({exc.reason})") from exc


def _token_count(text: str) -> int:
    return len(text.split())


def _block_offsets(text: str, pattern: re.Pattern) -> list[int]:
    """Start offsets of blocks delimited by pattern matches (0 included)."""
    starts = [m.start() for m in pattern.finditer(text)]
    if not starts or starts[0] != 0:
        starts.insert(0, 0)
    return starts


def _blocks(text: str, pattern: re.Pattern) -> list[str]:
    starts = _block_offsets(text, pattern)
    bounds = starts + [len(text)]
    return [text[bounds[i] : bounds[i + 1]] for i in range(len(starts))]


def _wiki_blocks(text: str) -> list[str]:
    if _WIKI_HEADER.search(text):
        return _blocks(text, _WIKI_HEADER)
    # No headers: fall back to paragraph boundaries.
    return _blocks(text, re.compile(r"(?<=\n\n)(?=\S)"))


def _sample_wiki(
    texts: Sequence[str], sampling: SamplingConfig, rng: random.Random
) -> list[str]:
    segments: list[str] = []
    for text in texts:
        blocks = _wiki_blocks(text)
        position = 0
        while position < len(blocks):
            target = rng.randint(sampling.min_tokens, sampling.max_tokens)
            taken: list[str] = []
            tokens = 0
            end = position
            while end < len(blocks) and tokens < target:
                block_tokens = _token_count(blocks[end])
                if taken and tokens + block_tokens > sampling.max_tokens:
                    break
                taken.append(blocks[end])
                tokens += block_tokens
                end += 1
            if end == position:  # single oversize block: skip it
                end += 1
            elif tokens >= sampling.min_tokens and tokens <= sampling.max_tokens:
                segments.append("".join(taken))
            position = end
    return segments


def _sample_grouped(
    pieces: Sequence[str],
    count_range: tuple[int, int],
    rng: random.Random,
) -> list[str]:
    """Concatenate consecutive pieces into groups of rng-chosen size."""
    grouped: list[str] = []
    low, high = count_range
    position = 0
    while position < len(pieces):
        size = rng.randint(low, high)
        group = pieces[position : position + size]
        if len(group) >= low:
            grouped.append("\n\n".join(part.strip("\n") for part in group))
        position += size
    return grouped


def ingest(
    category: Category,
    source_files: Sequence[str | Path],
    sampling: SamplingConfig,
) -> list[EditRecord]:
    """Build original-only records from raw source files.

    Wiki sources are cut into contiguous section runs whose whitespace-token
    count falls within the configured bounds; code records concatenate 2-5
    source segments (one per file); DSL files are taken whole; latex files
    are cut at sectioning commands and grouped 2-4 sections per record.
    Identical inputs and seed always produce identical records.
    """
    if not source_files:
        raise EmptySourceError("no source files given")
    texts = [_read_utf8(path) for path in source_files]
    rng = random.Random(sampling.seed)

    if category is Category.WIKI:
        segments = _sample_wiki(texts, sampling, rng)
    elif category is Category.CODE:
        pieces = [t for t in texts if t.strip()]
        if len(pieces) < sampling.code_segments[0]:
            raise EmptySourceError(
                f"code ingestion needs at least {sampling.code_segments[0]} "
                f"segments, got {len(pieces)}"
            )
        segments = _sample_grouped(pieces, sampling.code_segments, rng)
    elif category is Category.DSL:
        segments = [t for t in texts if t.strip()]
    else:
        sections: list[str] = []
        for text in texts:
            blocks = _blocks(text, _LATEX_SECTION)
            blocks = [b for b in blocks if b.strip()]
            if len(blocks) >= sampling.latex_sections[0]:
                sections.extend(blocks)
        segments = _sample_grouped(sections, sampling.latex_sections, rng)

    if sampling.max_records is not None:
        segments = segments[: sampling.max_records]
    if not segments:
        raise EmptySourceError(f"no usable {category.value} records in sources")

    return [
        EditRecord(id=f"{category.value}-{index:04d}", category=category, original=text)
        for index, text in enumerate(segments, start=1)
    ]


# --------------------------------------------------------------------------
# Splitting


def _test_quota(counts: dict[Category, int], test_fraction: float) -> dict[Category, int]:
    """Largest-remainder apportionment of the total test size over categories,
    keeping at least one record per category on each side when feasible."""
    total = round(test_fraction * sum(counts.values()))
    categories = sorted(counts, key=lambda c: c.value)
    quota = {c: test_fraction * counts[c] for c in categories}
    take = {c: min(int(quota[c]), counts[c] - 1) for c in categories}
    remaining = total - sum(take.values())
    by_remainder = sorted(
        categories, key=lambda c: (-(quota[c] - int(quota[c])), c.value)
    )
    index = 0
    while remaining > 0:
        cat = by_remainder[index % len(categories)]
        if take[cat] < counts[cat] - 1:
            take[cat] += 1
            remaining -= 1
        index += 1
        if index > 10 * len(categories) and remaining > 0:
            break  # every category is saturated; give back the remainder
    if total >= len(categories):
        donors = sorted(categories, key=lambda c: (-take[c], c.value))
        for cat in categories:
            if take[cat] == 0:
                for donor in donors:
                    if take[donor] > 1:
                        take[donor] -= 1
                        take[cat] = 1
                        break
    return take


def split_dataset(
    records: Sequence[EditRecord],
    test_fraction: float,
    seed: int,
) -> tuple[list[EditRecord], list[EditRecord]]:
    """Deterministic, category-stratified train/test partition.

    The test side gets round(test_fraction * N) records, apportioned to
    categories by largest remainder. Every category must have at least two
    records.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")

    by_category: dict[Category, list[int]] = {}
    for index, record in enumerate(records):
        by_category.setdefault(record.category, []).append(index)
    small = [c.value for c, idx in by_category.items() if len(idx) < 2]
    if not by_category or small:
        raise InsufficientDataError(
            "categories with fewer than 2 records: " + ", ".join(sorted(small))
            if small
            else "no records to split"
        )

    counts = {cat: len(indices) for cat, indices in by_category.items()}
    quota = _test_quota(counts, test_fraction)

    rng = random.Random(seed)
    test_indices: set[int] = set()
    for cat in sorted(by_category, key=lambda c: c.value):
        indices = list(by_category[cat])
        rng.shuffle(indices)
        test_indices.update(indices[: quota[cat]])

    train = [record for i, record in enumerate(records) if i not in test_indices]
    test = [record for i, record in enumerate(records) if i in test_indices]
    return train, test


def with_fields(record: EditRecord, **changes) -> EditRecord:
    """Copy of a record with some fields replaced."""
    return replace(record, **changes)

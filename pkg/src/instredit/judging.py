"""Diff-based judge scoring and threshold filtering.

The judge sees the entire original content, the edit request, and the
rendered diff — never the full edited text, which keeps prompts small and
focused on what actually changed. Its reply is reduced to an integer
coherence score in [1, 10]; records at or above the threshold are kept.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from instredit.providers import GenerationSettings, Provider, complete_many
from instredit.records import EditRecord
from instredit.templates import load_text_template

DEFAULT_ALPHA = 9


class ScoreParseError(Exception):
    """No usable score in the judge's output."""


class MissingScoreError(Exception):
    """Records reached the filter without a score; carries their ids."""

    def __init__(self, record_ids: Sequence[str]):
        self.record_ids = list(record_ids)
        super().__init__(f"records without g_score: {', '.join(self.record_ids)}")


@dataclass(frozen=True)
class JudgeVerdict:
    g_score: int
    raw_output: str
    kept: bool

    def __post_init__(self) -> None:
        if not 1 <= self.g_score <= 10:
            raise ValueError("g_score must be in [1, 10]")


def build_judge_prompt(
    original: str,
    instruction: str,
    rendered_diff: str,
    templates_dir: str | Path | None = None,
) -> str:
    """Judge prompt: rubric followed by original, edit request, and diff."""
    body = load_text_template("judge", templates_dir)
    return (
        body.replace("{original}", original)
        .replace("{instruction}", instruction)
        .replace("{diff}", rendered_diff)
    )


# Integers not embedded in words or decimals; "9." at sentence end still counts.
_STANDALONE_INT = re.compile(r"(?<![\w.])(\d+)(?!\w)(?!\.\d)")


def parse_g_score(judge_output: str, strict: bool = False) -> int:
    """First standalone integer in [1, 10] found in the output.

    With ``strict``, the whole output must be exactly one such integer.
    """
    if strict:
        stripped = judge_output.strip()
        if not stripped.isdigit() or not 1 <= int(stripped) <= 10:
            raise ScoreParseError(f"not a bare score in [1, 10]: {judge_output!r}")
        return int(stripped)

    found_any = False
    for match in _STANDALONE_INT.finditer(judge_output):
        found_any = True
        value = int(match.group(1))
        if 1 <= value <= 10:
            return value
    if found_any:
        raise ScoreParseError(f"score out of range [1, 10] in {judge_output!r}")
    raise ScoreParseError(f"no score found in {judge_output!r}")


def judge_record(
    record: EditRecord,
    provider: Provider,
    settings: GenerationSettings | None = None,
    alpha: int = DEFAULT_ALPHA,
    templates_dir: str | Path | None = None,
    strict: bool = False,
) -> JudgeVerdict:
    """Score one record; it must carry an instruction and a rendered diff."""
    if not record.edit_requests:
        raise ValueError(f"record {record.id} has no edit request")
    if record.diff is None:
        raise ValueError(f"record {record.id} has no rendered diff")
    prompt = build_judge_prompt(
        record.original, record.edit_requests[0], record.diff, templates_dir
    )
    raw = provider.complete(prompt, settings)
    score = parse_g_score(raw, strict=strict)
    return JudgeVerdict(g_score=score, raw_output=raw, kept=score >= alpha)


def score_records(
    records: Sequence[EditRecord],
    provider: Provider,
    settings: GenerationSettings | None = None,
    *,
    templates_dir: str | Path | None = None,
    jobs: int = 1,
    strict: bool = False,
) -> tuple[list[EditRecord], list[tuple[EditRecord, str]]]:
    """Score records through the judge.

    Returns (scored, quarantined): scored records carry their g_score;
    quarantined pairs carry the failure reason (unparseable score, provider
    failure, missing prerequisites) so nothing is silently dropped.
    """
    ready: list[EditRecord] = []
    quarantined: list[tuple[EditRecord, str]] = []
    prompts: list[str] = []
    for record in records:
        if not record.edit_requests or record.diff is None:
            quarantined.append((record, "missing edit request or diff"))
            continue
        ready.append(record)
        prompts.append(
            build_judge_prompt(
                record.original, record.edit_requests[0], record.diff, templates_dir
            )
        )

    results = complete_many(provider, prompts, settings, concurrency_limit=max(1, jobs))
    scored: list[EditRecord] = []
    for record, result in zip(ready, results):
        if isinstance(result, Exception):
            quarantined.append((record, f"provider failure: {result}"))
            continue
        try:
            score = parse_g_score(result, strict=strict)
        except ScoreParseError as exc:
            quarantined.append((record, str(exc)))
            continue
        scored.append(replace(record, g_score=score))
    return scored, quarantined


def filter_records(
    records: Sequence[EditRecord], alpha: int = DEFAULT_ALPHA
) -> tuple[list[EditRecord], list[EditRecord]]:
    """Partition records into (kept, rejected) by g_score >= alpha.

    Order is preserved on both sides; every record must carry a score.
    """
    missing = [record.id for record in records if record.g_score is None]
    if missing:
        raise MissingScoreError(missing)
    kept = [record for record in records if record.g_score >= alpha]
    rejected = [record for record in records if record.g_score < alpha]
    return kept, rejected

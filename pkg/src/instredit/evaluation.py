"""Scoring candidate editing models against reference edits."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from instredit.editing import MultiTurnTask, apply_multi_turn
from instredit.metrics import MetricReport, MetricScore, aggregate, score_pair
from instredit.providers import GenerationSettings, Provider
from instredit.records import EditRecord


class MissingOutputError(Exception):
    """Test records without a candidate output; carries their ids."""

    def __init__(self, record_ids: Sequence[str]):
        self.record_ids = list(record_ids)
        super().__init__(
            f"no candidate output for records: {', '.join(self.record_ids)}"
        )


def evaluate(
    records: Sequence[EditRecord],
    candidate_outputs: Mapping[str, str],
    weighted: bool = False,
) -> MetricReport:
    """Score candidate outputs against the records' reference edited texts."""
    missing = [r.id for r in records if r.id not in candidate_outputs]
    if missing:
        raise MissingOutputError(missing)
    unreferenced = [r.id for r in records if r.edited is None]
    if unreferenced:
        raise ValueError(
            f"records without reference edited text: {', '.join(unreferenced)}"
        )
    samples = [
        (record.category, score_pair(candidate_outputs[record.id], record.edited))
        for record in records
    ]
    return aggregate(samples, weighted=weighted)


def evaluate_multi_turn(
    records: Sequence[EditRecord],
    provider: Provider,
    settings: GenerationSettings | None = None,
    *,
    weighted: bool = False,
    max_chunk_tokens: int = 2048,
    templates_dir: str | Path | None = None,
    jobs: int = 1,
) -> tuple[MetricReport, dict[str, str]]:
    """Run each record's instruction sequence and score only the final output.

    Records must carry at least two edit requests and a reference edited
    text. Failed tasks score zero instead of being excluded (exclusion would
    inflate the means); the returned mapping lists each failure by record id.
    """
    failures: dict[str, str] = {}
    samples = []
    for record in records:
        if record.edited is None:
            raise ValueError(f"record {record.id} has no reference edited text")
        if len(record.edit_requests) < 2:
            raise ValueError(f"record {record.id} is not a multi-turn record")
        task = MultiTurnTask(
            record_id=record.id, instructions=tuple(record.edit_requests)
        )
        try:
            result = apply_multi_turn(
                record.original,
                task,
                provider,
                settings,
                max_chunk_tokens=max_chunk_tokens,
                templates_dir=templates_dir,
                jobs=jobs,
            )
        except Exception as exc:  # noqa: BLE001 - failures are scored, not raised
            failures[record.id] = str(exc)
            samples.append((record.category, MetricScore(bleu=0.0, rouge_l=0.0)))
            continue
        samples.append((record.category, score_pair(result.final, record.edited)))
    report = aggregate(samples, weighted=weighted)
    return report, failures

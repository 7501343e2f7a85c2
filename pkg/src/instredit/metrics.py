"""BLEU and ROUGE-L scoring with per-category report aggregation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from instredit._myers import lcs_length
from instredit.records import Category


class EmptyInputError(Exception):
    """Raised when asked to aggregate an empty sample list."""


@dataclass(frozen=True)
class MetricScore:
    bleu: float
    rouge_l: float


@dataclass(frozen=True)
class MetricReport:
    """Per-category means plus an overall mean of BLEU and ROUGE-L."""

    per_category: Mapping[Category, MetricScore]
    overall: MetricScore
    sample_count: Mapping[Category, int]
    aggregation: str = "category-mean"

    def to_dict(self) -> dict:
        return {
            "per_category": {
                cat.value: {
                    "bleu": score.bleu,
                    "rouge_l": score.rouge_l,
                    "sample_count": self.sample_count[cat],
                }
                for cat, score in self.per_category.items()
            },
            "overall": {"bleu": self.overall.bleu, "rouge_l": self.overall.rouge_l},
            "aggregation": self.aggregation,
        }


def tokenize(text: str) -> list[str]:
    """Split on runs of Unicode whitespace after trimming; "" -> []."""
    return text.split()


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str) -> float:
    """BLEU-4 with uniform weights over the n-gram orders the candidate has.

    Modified (clipped) n-gram precision per order; orders with zero matches
    are smoothed to 1/(2 * candidate n-gram count); orders longer than the
    candidate are skipped from the geometric mean. Brevity penalty
    exp(1 - r/c) applies when the candidate is shorter than the reference.
    Empty candidate or empty reference scores 0.0.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0

    log_sum = 0.0
    orders = 0
    for n in range(1, 5):
        total = len(cand) - n + 1
        if total < 1:
            break
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        precision = clipped / total if clipped else 1.0 / (2.0 * total)
        log_sum += math.log(precision)
        orders += 1

    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum / orders)


def rouge_l(candidate: str, reference: str) -> float:
    """F1 over the token-level longest common subsequence."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def score_pair(candidate: str, reference: str) -> MetricScore:
    return MetricScore(bleu=bleu(candidate, reference), rouge_l=rouge_l(candidate, reference))


def aggregate(
    samples: Iterable[tuple[Category, MetricScore]],
    weighted: bool = False,
) -> MetricReport:
    """Mean scores per category plus an overall mean.

    The overall value is the unweighted mean over the categories present;
    with ``weighted=True`` it is the mean over all samples instead (so
    larger categories count for more).
    """
    samples = list(samples)
    if not samples:
        raise EmptyInputError("no samples to aggregate")

    by_category: dict[Category, list[MetricScore]] = {}
    for category, score in samples:
        by_category.setdefault(category, []).append(score)

    per_category = {
        cat: MetricScore(
            bleu=sum(s.bleu for s in scores) / len(scores),
            rouge_l=sum(s.rouge_l for s in scores) / len(scores),
        )
        for cat, scores in by_category.items()
    }
    sample_count = {cat: len(scores) for cat, scores in by_category.items()}

    if weighted:
        overall = MetricScore(
            bleu=sum(s.bleu for _, s in samples) / len(samples),
            rouge_l=sum(s.rouge_l for _, s in samples) / len(samples),
        )
    else:
        means = list(per_category.values())
        overall = MetricScore(
            bleu=sum(s.bleu for s in means) / len(means),
            rouge_l=sum(s.rouge_l for s in means) / len(means),
        )

    return MetricReport(
        per_category=per_category,
        overall=overall,
        sample_count=sample_count,
        aggregation="sample-mean" if weighted else "category-mean",
    )

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instredit.metrics import (
    EmptyInputError,
    MetricScore,
    aggregate,
    bleu,
    rouge_l,
    tokenize,
)
from instredit.records import Category

import oracles

WORKED_CANDIDATE = "the cat sat on mat"
WORKED_REFERENCE = "the cat sat on the mat"
# Hand n-gram oracle: p1 = 5/5, p2 = 3/4, p3 = 2/3, p4 = 1/2, BP = exp(-0.2)
WORKED_BLEU = 0.5789
# LCS = 5, P = 1.0, R = 5/6
WORKED_ROUGE = 0.9091


class TestTokenize:
    def test_basic(self):
        assert tokenize("the cat") == ["the", "cat"]

    def test_empty(self):
        assert tokenize("") == []
        assert tokenize("   \n\t ") == []

    def test_whitespace_collapse(self):
        assert tokenize("a  b\nc") == ["a", "b", "c"]


class TestBleu:
    def test_identity(self):
        assert bleu("x y z w v", "x y z w v") == 1.0
        assert bleu("one", "one") == 1.0

    def test_identity_after_tokenization(self):
        # equal token sequences score 1.0 even when the raw strings differ
        assert bleu("a  b\nc", "a b c") == 1.0
        assert rouge_l("a  b\nc", "a b c") == 1.0

    def test_worked_pair(self):
        assert bleu(WORKED_CANDIDATE, WORKED_REFERENCE) == pytest.approx(
            WORKED_BLEU, abs=1e-4
        )

    def test_empty_candidate(self):
        assert bleu("", "anything") == 0.0

    def test_empty_reference(self):
        assert bleu("anything", "") == 0.0

    def test_short_candidate_skips_long_orders(self):
        # two tokens: only orders 1-2 enter the geometric mean
        assert bleu("a b", "a b") == 1.0


class TestRougeL:
    def test_identity(self):
        assert rouge_l("x y z", "x y z") == 1.0

    def test_worked_pair(self):
        assert rouge_l(WORKED_CANDIDATE, WORKED_REFERENCE) == pytest.approx(
            WORKED_ROUGE, abs=1e-4
        )

    def test_disjoint(self):
        assert rouge_l("xyz", "abc") == 0.0

    def test_empty_sides(self):
        assert rouge_l("", "a") == 0.0
        assert rouge_l("a", "") == 0.0

    def test_monotone_under_extension(self):
        # completing a prefix candidate never lowers the score
        reference = "a b c d e f"
        ref_tokens = reference.split()
        for cut in range(1, len(ref_tokens)):
            prefix = " ".join(ref_tokens[:cut])
            assert rouge_l(reference, reference) >= rouge_l(prefix, reference)
            completed = prefix + " " + " ".join(ref_tokens[cut:])
            assert rouge_l(completed, reference) >= rouge_l(prefix, reference)


class TestOracleEquivalence:
    def test_100_random_sequences(self):
        rng = random.Random(17)
        vocab = ["the", "cat", "sat", "on", "mat", "dog", "ran", "far"]
        for _ in range(100):
            cand = " ".join(
                rng.choice(vocab) for _ in range(rng.randint(0, 10))
            )
            ref = " ".join(rng.choice(vocab) for _ in range(rng.randint(0, 10)))
            assert bleu(cand, ref) == pytest.approx(
                oracles.bleu_bruteforce(cand, ref), abs=1e-9
            )
            assert rouge_l(cand, ref) == pytest.approx(
                oracles.rouge_l_bruteforce(cand, ref), abs=1e-9
            )

    @settings(max_examples=150, deadline=None)
    @given(
        st.lists(st.sampled_from("abcd"), max_size=12),
        st.lists(st.sampled_from("abcd"), max_size=12),
    )
    def test_bounded(self, cand_tokens, ref_tokens):
        cand, ref = " ".join(cand_tokens), " ".join(ref_tokens)
        assert 0.0 <= bleu(cand, ref) <= 1.0
        assert 0.0 <= rouge_l(cand, ref) <= 1.0


class TestAggregate:
    def test_single_sample(self):
        report = aggregate([(Category.WIKI, MetricScore(0.5, 0.5))])
        assert report.overall == MetricScore(0.5, 0.5)
        assert report.sample_count[Category.WIKI] == 1

    def test_two_category_mean(self):
        report = aggregate(
            [
                (Category.WIKI, MetricScore(0.8, 0.8)),
                (Category.CODE, MetricScore(0.6, 0.6)),
            ]
        )
        assert report.overall.bleu == pytest.approx(0.7)

    def test_published_row_category_mean(self):
        # Published overall for this row is 0.9245, consistent with
        # sample-weighted averaging; the caption's category mean gives 0.9280.
        report = aggregate(
            [
                (Category.LATEX, MetricScore(0.9539, 0.9821)),
                (Category.DSL, MetricScore(0.9521, 0.9710)),
                (Category.WIKI, MetricScore(0.8521, 0.9185)),
                (Category.CODE, MetricScore(0.9538, 0.9836)),
            ]
        )
        assert report.overall.bleu == pytest.approx(0.9280, abs=1e-3)

    def test_weighted_mean_differs(self):
        samples = [
            (Category.WIKI, MetricScore(1.0, 1.0)),
            (Category.WIKI, MetricScore(1.0, 1.0)),
            (Category.WIKI, MetricScore(1.0, 1.0)),
            (Category.CODE, MetricScore(0.0, 0.0)),
        ]
        assert aggregate(samples).overall.bleu == pytest.approx(0.5)
        assert aggregate(samples, weighted=True).overall.bleu == pytest.approx(0.75)
        assert aggregate(samples, weighted=True).aggregation == "sample-mean"

    def test_overall_recomputable_from_categories(self):
        rng = random.Random(3)
        samples = [
            (cat, MetricScore(rng.random(), rng.random()))
            for cat in Category
            for _ in range(rng.randint(1, 5))
        ]
        report = aggregate(samples)
        mean_bleu = sum(s.bleu for s in report.per_category.values()) / len(
            report.per_category
        )
        assert report.overall.bleu == pytest.approx(mean_bleu, abs=1e-12)

    def test_empty_raises(self):
        with pytest.raises(EmptyInputError):
            aggregate([])

    def test_to_dict_shape(self):
        report = aggregate([(Category.DSL, MetricScore(0.25, 0.75))])
        data = report.to_dict()
        assert data["per_category"]["dsl"]["bleu"] == 0.25
        assert data["per_category"]["dsl"]["sample_count"] == 1
        assert data["overall"]["rouge_l"] == 0.75
        assert data["aggregation"] == "category-mean"

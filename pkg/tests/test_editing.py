from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instredit.editing import (
    EmptyOutputError,
    MultiTurnTask,
    OversizeLineError,
    TurnError,
    apply_edit,
    apply_multi_turn,
    estimate_tokens,
    generate_turn_sequence,
    plan_chunks,
)
from instredit.providers import (
    CannedProvider,
    IdentityEditorProvider,
    MockWorkflowProvider,
    Provider,
    ProviderError,
    ReplayProvider,
    ScriptedReplacerProvider,
    Transcript,
)
from instredit.records import Category, EditRecord

REPLACE = re.compile(r"Replace '(.*?)' with '(.*?)'")


def long_text(tokens: int) -> str:
    words = [f"w{i}" for i in range(tokens)]
    return "\n".join(" ".join(words[k : k + 8]) for k in range(0, tokens, 8))


class TestPlanChunks:
    def test_single_chunk_when_fits(self):
        text = " ".join(f"t{i}" for i in range(100))
        plan = plan_chunks(text, 2048)
        assert len(plan) == 1
        assert plan.boundaries == ((0, len(text)),)
        assert not plan.oversize_line_split

    def test_three_chunks_for_5000_tokens(self):
        text = long_text(5000)
        plan = plan_chunks(text, 2048)
        assert len(plan) == 3  # ceil(5000 / 2048)
        assert "".join(plan.slices(text)) == text
        for chunk in plan.slices(text):
            assert estimate_tokens(chunk) <= 2048

    def test_boundaries_snap_to_line_breaks(self):
        text = long_text(120)
        plan = plan_chunks(text, 30)
        for start, end in plan.boundaries[:-1]:
            assert text[end - 1] == "\n"

    def test_oversize_line_splits_at_characters(self):
        text = "aa bb cc d"  # ten chars, four tokens, one line
        plan = plan_chunks(text, 1)
        assert plan.oversize_line_split
        assert len(plan) > 1
        assert "".join(plan.slices(text)) == text
        for chunk in plan.slices(text):
            assert estimate_tokens(chunk) <= 1

    def test_oversize_strict_raises(self):
        with pytest.raises(OversizeLineError):
            plan_chunks("aa bb cc d", 1, strict=True)

    def test_empty_text(self):
        plan = plan_chunks("", 10)
        assert plan.boundaries == ((0, 0),)

    def test_invalid_budget(self):
        with pytest.raises(ValueError):
            plan_chunks("x", 0)

    def test_custom_estimator(self):
        plan = plan_chunks("ab\ncd\nef", 2, estimator=len)
        assert "".join(plan.slices("ab\ncd\nef")) == "ab\ncd\nef"
        for chunk in plan.slices("ab\ncd\nef"):
            assert len(chunk) <= 2 or plan.oversize_line_split

    @settings(max_examples=150, deadline=None)
    @given(
        st.text(alphabet=st.sampled_from(list("ab \nxyz")), max_size=120),
        st.integers(1, 12),
    )
    def test_coverage_property(self, text, budget):
        plan = plan_chunks(text, budget)
        assert "".join(plan.slices(text)) == text
        for chunk in plan.slices(text):
            assert estimate_tokens(chunk) <= budget


class TestApplyEdit:
    def test_identity_mock(self):
        text = "line one\nline two\n\nline four"
        assert apply_edit(text, "whatever", IdentityEditorProvider()) == text

    def test_scripted_replacer(self):
        out = apply_edit(
            "Sam Wilson, formerly the Falcon, assumes the mantle.",
            "Replace 'Falcon' with 'Captain America'",
            ScriptedReplacerProvider(),
        )
        assert "the Captain America" in out

    def test_chunked_identity_concatenates(self):
        text = long_text(200)
        out = apply_edit(text, "keep", IdentityEditorProvider(), max_chunk_tokens=40)
        assert out == text

    def test_chunk_no_chunk_equivalence(self):
        text = long_text(320)  # about 5x a 64-token budget
        unchunked = apply_edit(text, "keep", IdentityEditorProvider())
        chunked = apply_edit(
            text, "keep", IdentityEditorProvider(), max_chunk_tokens=64
        )
        assert unchunked == chunked == text

    def test_parallel_chunks_match_sequential(self):
        text = long_text(200)
        sequential = apply_edit(
            text, "keep", IdentityEditorProvider(), max_chunk_tokens=40, jobs=1
        )
        parallel = apply_edit(
            text, "keep", IdentityEditorProvider(), max_chunk_tokens=40, jobs=8
        )
        assert sequential == parallel

    def test_empty_instruction_rejected(self):
        with pytest.raises(ValueError):
            apply_edit("x", "", IdentityEditorProvider())

    def test_empty_output_error(self):
        class _Empty(Provider):
            def _complete(self, prompt, settings):
                return ""

        with pytest.raises(EmptyOutputError):
            apply_edit("nonempty", "edit", _Empty())

    def test_provider_error_chunk_index(self):
        text = long_text(100)
        provider = ReplayProvider(Transcript())
        with pytest.raises(ProviderError) as excinfo:
            apply_edit(text, "edit", provider, max_chunk_tokens=30)
        assert "chunk 1/" in str(excinfo.value)


class TestGenerateTurnSequence:
    def record(self):
        return EditRecord(
            id="r1",
            category=Category.WIKI,
            original="The quick brown foxes jumped over the lazy dogs today",
        )

    def test_scripted_three_turns(self):
        responses = [
            "<Edit Request>first request</Edit Request>"
            "<Edit Request>second request</Edit Request>"
            "<Edit Request>third request</Edit Request>"
        ]
        task = generate_turn_sequence(self.record(), 3, CannedProvider(responses))
        assert task.instructions == ("first request", "second request", "third request")
        assert task.record_id == "r1"

    def test_count_mismatch(self):
        responses = [
            "<Edit Request>one</Edit Request><Edit Request>two</Edit Request>"
        ]
        from instredit.templates import ParseError

        with pytest.raises(ParseError):
            generate_turn_sequence(self.record(), 3, CannedProvider(responses))

    def test_k_below_two_rejected(self):
        with pytest.raises(ValueError):
            generate_turn_sequence(self.record(), 1, IdentityEditorProvider())

    def test_workflow_mock_generates_k(self):
        task = generate_turn_sequence(self.record(), 3, MockWorkflowProvider())
        assert len(task.instructions) == 3
        assert len(set(task.instructions)) == 3


class TestMultiTurnTask:
    def test_needs_two_instructions(self):
        with pytest.raises(ValueError):
            MultiTurnTask(record_id="r", instructions=("only one",))

    def test_rejects_empty_instruction(self):
        with pytest.raises(ValueError):
            MultiTurnTask(record_id="r", instructions=("a", ""))


class TestApplyMultiTurn:
    def test_two_scripted_replacements_compose(self):
        task = MultiTurnTask(
            record_id="r",
            instructions=(
                "Replace 'A' with 'B'",
                "Replace 'B' with 'C'",
            ),
        )
        result = apply_multi_turn("A", task, ScriptedReplacerProvider())
        assert result.final == "C"
        assert result.turns == ("B", "C")

    def test_identity_mock_is_identity(self):
        task = MultiTurnTask(record_id="r", instructions=("x", "y", "z"))
        text = "anything at all\nlines too"
        result = apply_multi_turn(text, task, IdentityEditorProvider())
        assert result.final == text
        assert all(turn == text for turn in result.turns)

    def test_equals_composition_of_apply_edit(self):
        provider = ScriptedReplacerProvider()
        original = "alpha beta gamma"
        instructions = (
            "Replace 'alpha' with 'one'",
            "Replace 'beta' with 'two'",
            "Replace 'gamma' with 'three'",
        )
        task = MultiTurnTask(record_id="r", instructions=instructions)
        expected = original
        for instruction in instructions:
            expected = apply_edit(expected, instruction, provider)
        assert apply_multi_turn(original, task, provider).final == expected

    def test_three_turn_latex_task(self):
        # duplicate removal, footnote split, TODO rewrite: all three changes
        # must be present in the final text
        original = (
            "\\begin{abstract} \\begin{abstract}\n"
            "\\footnote{Dataset is available at \\url{site}}\n"
            "\\{TODO: we introduce distractibility as a new metric.\\}"
        )
        task = MultiTurnTask(
            record_id="latex",
            instructions=(
                "Replace '\\begin{abstract} \\begin{abstract}' with '\\begin{abstract}'",
                "Replace '\\footnote{Dataset is available at \\url{site}}' with "
                "'\\footnotemark \\footnotetext{Dataset is available at \\url{site}}'",
                "Replace 'TODO: we' with 'We'",
            ),
        )
        result = apply_multi_turn(original, task, ScriptedReplacerProvider())
        assert "\\begin{abstract} \\begin{abstract}" not in result.final
        assert "\\footnotemark \\footnotetext{" in result.final
        assert "TODO" not in result.final
        assert "\\{We introduce distractibility" in result.final

    def test_turn_error_carries_index(self):
        class _FailsSecond(Provider):
            calls = 0

            def _complete(self, prompt, settings):
                type(self).calls += 1
                if type(self).calls >= 2:
                    raise ProviderError("down")
                from instredit.providers import split_editing_prompt

                return split_editing_prompt(prompt)[0]

        task = MultiTurnTask(record_id="r", instructions=("a", "b", "c"))
        with pytest.raises(TurnError) as excinfo:
            apply_multi_turn("text", task, _FailsSecond())
        assert excinfo.value.turn_index == 1
        assert isinstance(excinfo.value.__cause__, ProviderError)

    def test_chunked_multi_turn_identity(self):
        text = long_text(300)
        task = MultiTurnTask(record_id="r", instructions=("a", "b"))
        result = apply_multi_turn(
            text, task, IdentityEditorProvider(), max_chunk_tokens=64
        )
        assert result.final == text

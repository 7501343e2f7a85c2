from __future__ import annotations

import pytest

from instredit.records import Category, EditRecord

# Word pool for deterministic synthetic corpora. Words are >= 4 chars and
# alphabetic so the workflow mock can always derive replace instructions.
WORDS = [
    "mountain", "harbor", "signal", "lantern", "meadow", "copper", "anchor",
    "breeze", "canyon", "ember", "falcon", "garnet", "hollow", "island",
    "juniper", "kestrel", "ledger", "marble", "needle", "orchid",
]


def _wiki_text(i: int) -> str:
    tokens = [WORDS[(i * 7 + j) % len(WORDS)] + str(j % 5) for j in range(30)]
    return "\n".join(" ".join(tokens[k : k + 6]) for k in range(0, 30, 6))


def _code_text(i: int) -> str:
    word = WORDS[i % len(WORDS)]
    return (
        f"def compute_{word}(value):\n"
        f"    total = value + {i}\n"
        f"    return total\n\n"
        f"def helper_{word}(x):\n"
        f"    return x * 2"
    )


def _dsl_text(i: int) -> str:
    word = WORDS[i % len(WORDS)].upper()
    return (
        f"CREATE TABLE {word}_DATA\n(\n"
        f"  RECORD_ID NUMBER NOT NULL,\n"
        f"  CREATE_TIME NUMBER (10) NOT NULL,\n"
        f"  STATUS VARCHAR(20) NULL\n)"
    )


def _latex_text(i: int) -> str:
    word = WORDS[i % len(WORDS)]
    return (
        f"\\section{{Overview of {word}}}\n"
        f"The {word} methodology applies broadly to structured editing.\n"
        f"\\begin{{equation}}\n  y = {i} x\n\\end{{equation}}"
    )


_MAKERS = {
    Category.WIKI: _wiki_text,
    Category.CODE: _code_text,
    Category.DSL: _dsl_text,
    Category.LATEX: _latex_text,
}


def make_corpus(per_category: int = 25) -> list[EditRecord]:
    """Deterministic synthetic corpus with per_category records per category."""
    records = []
    for category in Category:
        maker = _MAKERS[category]
        for i in range(per_category):
            records.append(
                EditRecord(
                    id=f"{category.value}-{i:04d}",
                    category=category,
                    original=maker(i),
                )
            )
    return records


@pytest.fixture
def corpus_100() -> list[EditRecord]:
    return make_corpus(25)


@pytest.fixture
def corpus_40() -> list[EditRecord]:
    return make_corpus(10)

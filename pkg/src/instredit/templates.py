"""Prompt templates: loading, rendering, and edit-request parsing.

Templates live as plain-text files with YAML front-matter. The four
instruction-generation templates (one per category) carry a strategy and,
for in-context ones, an ordered exemplar list that is rendered into the
body's {exemplars} slot. The editing, multi-turn and judge templates are
plain bodies with named placeholders.

Placeholders are literal markers replaced verbatim ({content}, {exemplars},
{instruction}, {original}, {diff}, {count}); bodies may freely contain other
braces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import yaml

from instredit.records import Category


class TemplateError(Exception):
    """Raised on malformed template files or missing placeholders."""


class ParseError(Exception):
    """Raised when a provider response cannot be parsed into edit requests."""


class Strategy(str, Enum):
    ZERO_SHOT = "zero-shot"
    IN_CONTEXT = "in-context"


@dataclass(frozen=True)
class PromptTemplate:
    category: Category
    strategy: Strategy
    body: str
    exemplars: tuple[str, ...] = ()
    origin: str = "repo-authored"

    def __post_init__(self) -> None:
        if self.body.count("{content}") != 1:
            raise TemplateError(
                f"{self.category.value} template must contain exactly one "
                "{content} placeholder"
            )
        if self.strategy is Strategy.IN_CONTEXT:
            if not self.exemplars:
                raise TemplateError("in-context template needs at least one exemplar")
            if self.body.count("{exemplars}") != 1:
                raise TemplateError("in-context template needs an {exemplars} slot")
        elif self.exemplars:
            raise TemplateError("zero-shot template must not carry exemplars")

    def render(self, content: str) -> str:
        body = self.body
        if self.strategy is Strategy.IN_CONTEXT:
            body = body.replace("{exemplars}", render_exemplars(self.exemplars))
        return body.replace("{content}", content)


def render_exemplars(exemplars: tuple[str, ...]) -> str:
    blocks = []
    for number, text in enumerate(exemplars, start=1):
        blocks.append(
            f"[Example {number}]\n<Edit Request>\n{text}\n</Edit Request>"
        )
    return "\n".join(blocks)


def _split_front_matter(raw: str, name: str) -> tuple[dict, str]:
    if not raw.startswith("---\n"):
        return {}, raw
    end = raw.find("\n---\n", 4)
    if end < 0:
        raise TemplateError(f"{name}: unterminated front-matter")
    try:
        meta = yaml.safe_load(raw[4:end]) or {}
    except yaml.YAMLError as exc:
        raise TemplateError(f"{name}: bad front-matter: {exc}") from exc
    if not isinstance(meta, dict):
        raise TemplateError(f"{name}: front-matter must be a mapping")
    return meta, raw[end + 5 :]


def _template_root(templates_dir: str | Path | None) -> Path:
    if templates_dir is not None:
        return Path(templates_dir)
    return Path(str(resources.files("instredit") / "templates"))


def _read_template_file(name: str, templates_dir: str | Path | None) -> str:
    path = _template_root(templates_dir) / name
    if not path.is_file():
        raise TemplateError(f"template file not found: {path}")
    return path.read_text(encoding="utf-8")


def load_template(
    category: Category, templates_dir: str | Path | None = None
) -> PromptTemplate:
    """Load the instruction-generation template for a category."""
    name = f"{category.value}.txt"
    meta, body = _split_front_matter(_read_template_file(name, templates_dir), name)
    try:
        strategy = Strategy(meta["strategy"])
        declared = Category(meta["category"])
    except (KeyError, ValueError) as exc:
        raise TemplateError(f"{name}: invalid front-matter: {exc}") from exc
    if declared is not category:
        raise TemplateError(f"{name}: declares category {declared.value}")
    exemplars = tuple(meta.get("exemplars") or ())
    if not all(isinstance(e, str) and e.strip() for e in exemplars):
        raise TemplateError(f"{name}: exemplars must be nonempty strings")
    return PromptTemplate(
        category=category,
        strategy=strategy,
        body=body,
        exemplars=exemplars,
        origin=str(meta.get("origin", "repo-authored")),
    )


def load_text_template(name: str, templates_dir: str | Path | None = None) -> str:
    """Load a plain template body (editing, multiturn, judge) by file name."""
    meta, body = _split_front_matter(
        _read_template_file(f"{name}.txt", templates_dir), name
    )
    del meta  # only carries the origin marker
    return body


def template_digests(templates_dir: str | Path | None = None) -> dict[str, str]:
    """SHA-256 of every template file, keyed by file name."""
    import hashlib

    root = _template_root(templates_dir)
    digests = {}
    for path in sorted(root.glob("*.txt")):
        digests[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return digests


def build_instruction_prompt(
    record, templates_dir: str | Path | None = None
) -> str:
    """Render the category's instruction-generation prompt for one record."""
    if not record.original:
        raise ValueError("record original must be nonempty")
    template = load_template(record.category, templates_dir)
    return template.render(record.original)


_TAGGED = re.compile(r"<Edit Request>(.*?)</Edit Request>", re.DOTALL)


def parse_edit_request(provider_output: str, strict: bool = False) -> str:
    """Extract exactly one edit request from a provider response.

    Returns the trimmed text between the first <Edit Request> tag pair. When
    no tags are present and ``strict`` is off, a single nonempty paragraph is
    accepted as-is. Multiple tag pairs are rejected: one response must carry
    one request.
    """
    if not provider_output or not provider_output.strip():
        raise ParseError("empty provider output")
    matches = _TAGGED.findall(provider_output)
    if len(matches) > 1:
        raise ParseError(f"expected one edit request, found {len(matches)}")
    if len(matches) == 1:
        request = matches[0].strip()
        if not request:
            raise ParseError("empty edit request between tags")
        return request
    if strict:
        raise ParseError("no <Edit Request> tags in output")
    fallback = provider_output.strip()
    if "\n\n" in fallback:
        raise ParseError("untagged output is not a single paragraph")
    return fallback


def parse_edit_requests(provider_output: str, expected_count: int) -> list[str]:
    """Extract exactly ``expected_count`` tagged edit requests, in order."""
    if not provider_output or not provider_output.strip():
        raise ParseError("empty provider output")
    matches = [m.strip() for m in _TAGGED.findall(provider_output)]
    if len(matches) != expected_count:
        raise ParseError(
            f"expected {expected_count} edit requests, found {len(matches)}"
        )
    if not all(matches):
        raise ParseError("empty edit request between tags")
    return matches

"""Structured text diffs with character-level inline change tracking.

A diff is computed in two passes: a minimal line-level alignment of the two
texts, then a minimal character-level alignment for every changed line pair.
Inline changes are coalesced into four kinds of operations (replace, delete,
insert, equal) and rendered in a bracketed inline notation:

    Line 4 differs:
    Differences: CREAT[E -> ION]_TIME[+STAMP+] NUMBER (10) NOT NULL,

Unchanged lines never appear in the rendering. Scripts are replayable:
applying a script to the original text reproduces the edited text
byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from instredit._myers import edit_script


class MismatchError(Exception):
    """Raised when a diff script does not fit the text it is applied to."""


class ChangeKind(str, Enum):
    REPLACE = "replace"
    DELETE = "delete"
    INSERT = "insert"
    EQUAL = "equal"


class LineKind(str, Enum):
    """How a line diff relates to the two texts.

    CHANGED lines consume one original line and produce one edited line.
    DELETED lines consume an original line and produce nothing; INSERTED
    lines produce an edited line out of nothing.
    """

    CHANGED = "changed"
    DELETED = "deleted"
    INSERTED = "inserted"


@dataclass(frozen=True)
class ChangeOp:
    """One inline change operation on a line.

    ``original`` is the affected segment of the original line (absent for
    insertions), ``modified`` the corresponding segment of the edited line
    (absent for deletions). Equal segments carry the same text on both sides.
    """

    kind: ChangeKind
    original: str | None = None
    modified: str | None = None

    def __post_init__(self) -> None:
        if self.kind is ChangeKind.REPLACE:
            if not self.original or not self.modified:
                raise ValueError("replace requires nonempty original and modified")
            if self.original == self.modified:
                raise ValueError("replace requires original != modified")
        elif self.kind is ChangeKind.DELETE:
            if not self.original or self.modified is not None:
                raise ValueError("delete requires nonempty original and no modified")
        elif self.kind is ChangeKind.INSERT:
            if not self.modified or self.original is not None:
                raise ValueError("insert requires nonempty modified and no original")
        else:
            if self.original is None or self.original != self.modified:
                raise ValueError("equal requires original == modified")

    @classmethod
    def replace(cls, original: str, modified: str) -> "ChangeOp":
        return cls(ChangeKind.REPLACE, original, modified)

    @classmethod
    def delete(cls, original: str) -> "ChangeOp":
        return cls(ChangeKind.DELETE, original, None)

    @classmethod
    def insert(cls, modified: str) -> "ChangeOp":
        return cls(ChangeKind.INSERT, None, modified)

    @classmethod
    def equal(cls, text: str) -> "ChangeOp":
        return cls(ChangeKind.EQUAL, text, text)


@dataclass(frozen=True)
class LineDiff:
    """All inline changes for one line.

    ``line_number`` is 1-based: the index of the line in the original text,
    except for inserted lines where it is the index of the new line in the
    edited text. Concatenating the original-side payloads of ``ops`` yields
    the original line; concatenating the modified-side payloads yields the
    edited line. A whole-line insertion or deletion of an *empty* line has an
    empty ``ops`` sequence (there is no segment to show).
    """

    line_number: int
    ops: tuple[ChangeOp, ...]
    kind: LineKind = LineKind.CHANGED

    def __post_init__(self) -> None:
        if self.line_number < 1:
            raise ValueError("line_number is 1-based")
        for prev, cur in zip(self.ops, self.ops[1:]):
            if prev.kind is cur.kind:
                raise ValueError("adjacent ops must not share a kind")

    def original_text(self) -> str:
        """The original line reconstructed from the ops."""
        return "".join(op.original for op in self.ops if op.original is not None)

    def modified_text(self) -> str:
        """The edited line reconstructed from the ops."""
        return "".join(op.modified for op in self.ops if op.modified is not None)


@dataclass(frozen=True)
class DiffScript:
    """An ordered, replayable set of line diffs between two texts."""

    line_diffs: tuple[LineDiff, ...]
    original_line_count: int
    edited_line_count: int

    @property
    def is_empty(self) -> bool:
        return not self.line_diffs


def _inline_ops(original_line: str, edited_line: str) -> tuple[ChangeOp, ...]:
    """Coalesced minimal character-level ops between two differing lines."""
    ops: list[ChangeOp] = []
    equal_run: list[str] = []
    deleted_run: list[str] = []
    inserted_run: list[str] = []

    def flush_changes() -> None:
        deleted = "".join(deleted_run)
        inserted = "".join(inserted_run)
        deleted_run.clear()
        inserted_run.clear()
        if deleted and inserted:
            if deleted == inserted:  # cannot occur for a minimal script
                ops.append(ChangeOp.equal(deleted))
            else:
                ops.append(ChangeOp.replace(deleted, inserted))
        elif deleted:
            ops.append(ChangeOp.delete(deleted))
        elif inserted:
            ops.append(ChangeOp.insert(inserted))

    def flush_equal() -> None:
        if equal_run:
            ops.append(ChangeOp.equal("".join(equal_run)))
            equal_run.clear()

    for op, char in edit_script(original_line, edited_line):
        if op == "equal":
            flush_changes()
            equal_run.append(char)
        else:
            flush_equal()
            if op == "delete":
                deleted_run.append(char)
            else:
                inserted_run.append(char)
    flush_changes()
    flush_equal()
    return tuple(ops)


def _whole_line(kind: LineKind, line_number: int, text: str) -> LineDiff:
    if kind is LineKind.DELETED:
        ops = (ChangeOp.delete(text),) if text else ()
    else:
        ops = (ChangeOp.insert(text),) if text else ()
    return LineDiff(line_number, ops, kind)


def compute_diff(original: str, edited: str) -> DiffScript:
    """Diff two texts into a line-aligned, character-level change script.

    Lines are split at "\\n" with the final fragment kept even when the text
    does not end in a newline; comparison is byte-for-byte with no
    normalization. Identical texts yield an empty script.
    """
    original_lines = original.split("\n")
    edited_lines = edited.split("\n")

    line_diffs: list[LineDiff] = []
    orig_no = 0  # 1-based counters of consumed lines on each side
    edit_no = 0
    deleted: list[tuple[int, str]] = []
    inserted: list[tuple[int, str]] = []

    def flush_region() -> None:
        paired = min(len(deleted), len(inserted))
        for i in range(paired):
            number, old = deleted[i]
            _, new = inserted[i]
            line_diffs.append(LineDiff(number, _inline_ops(old, new)))
        for number, old in deleted[paired:]:
            line_diffs.append(_whole_line(LineKind.DELETED, number, old))
        for number, new in inserted[paired:]:
            line_diffs.append(_whole_line(LineKind.INSERTED, number, new))
        deleted.clear()
        inserted.clear()

    for op, line in edit_script(original_lines, edited_lines):
        if op == "equal":
            flush_region()
            orig_no += 1
            edit_no += 1
        elif op == "delete":
            orig_no += 1
            deleted.append((orig_no, line))
        else:
            edit_no += 1
            inserted.append((edit_no, line))
    flush_region()

    return DiffScript(tuple(line_diffs), len(original_lines), len(edited_lines))


def render_inline(ops: tuple[ChangeOp, ...]) -> str:
    """Bracketed inline notation for one line's ops."""
    parts: list[str] = []
    for op in ops:
        if op.kind is ChangeKind.EQUAL:
            parts.append(op.original or "")
        elif op.kind is ChangeKind.REPLACE:
            parts.append(f"[{op.original} -> {op.modified}]")
        elif op.kind is ChangeKind.DELETE:
            parts.append(f"[-{op.original}-]")
        else:
            parts.append(f"[+{op.modified}+]")
    return "".join(parts)


def render_diff(script: DiffScript) -> str:
    """Render a script in the two-lines-per-change format.

    Each line diff emits "Line {n} differs:" followed by
    "Differences: {inline}"; unchanged lines are omitted entirely. An empty
    script renders as the empty string.
    """
    blocks: list[str] = []
    for line_diff in script.line_diffs:
        blocks.append(f"Line {line_diff.line_number} differs:")
        blocks.append(f"Differences: {render_inline(line_diff.ops)}")
    return "\n".join(blocks)


def apply_diff(original: str, script: DiffScript) -> str:
    """Replay a script against the original text and return the edited text.

    Raises MismatchError when the script's original-side payloads do not
    reconstruct the given text (i.e. the script was computed from something
    else).
    """
    original_lines = original.split("\n")
    if len(original_lines) != script.original_line_count:
        raise MismatchError(
            f"script expects {script.original_line_count} lines, "
            f"text has {len(original_lines)}"
        )

    out: list[str] = []
    next_orig = 0  # 0-based index of the next unconsumed original line

    for line_diff in script.line_diffs:
        if line_diff.kind is LineKind.INSERTED:
            target = line_diff.line_number - 1  # position in the edited text
            while len(out) < target:
                if next_orig >= len(original_lines):
                    raise MismatchError(
                        f"insertion at edited line {line_diff.line_number} "
                        "lies beyond the reconstructed text"
                    )
                out.append(original_lines[next_orig])
                next_orig += 1
            if len(out) != target:
                raise MismatchError(
                    f"insertion point {line_diff.line_number} already passed"
                )
            out.append(line_diff.modified_text())
            continue

        target = line_diff.line_number - 1  # position in the original text
        if target < next_orig or target >= len(original_lines):
            raise MismatchError(f"original line {line_diff.line_number} out of range")
        while next_orig < target:
            out.append(original_lines[next_orig])
            next_orig += 1
        expected = line_diff.original_text()
        actual = original_lines[next_orig]
        if expected != actual:
            raise MismatchError(
                f"line {line_diff.line_number} does not match the script: "
                f"expected {expected!r}, found {actual!r}"
            )
        next_orig += 1
        if line_diff.kind is LineKind.CHANGED:
            out.append(line_diff.modified_text())

    out.extend(original_lines[next_orig:])
    if len(out) != script.edited_line_count:
        raise MismatchError(
            f"replay produced {len(out)} lines, "
            f"script expects {script.edited_line_count}"
        )
    return "\n".join(out)


def categorize_counts(script: DiffScript) -> dict[ChangeKind, int]:
    """Number of ops of each kind across the whole script."""
    counts = {kind: 0 for kind in ChangeKind}
    for line_diff in script.line_diffs:
        for op in line_diff.ops:
            counts[op.kind] += 1
    return counts

"""Minimal edit scripts between two sequences (Myers O(ND) greedy algorithm).

Shared backend for line-level and character-level diffing and for the
LCS-based ROUGE-L computation. Operates on any sequences of hashable,
equality-comparable items (strings of characters, lists of lines or tokens).
"""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

# An edit script is a list of (op, item) steps where op is one of
# "equal", "delete" (item from the original) or "insert" (item from the
# edited side), in left-to-right order.
EditStep = tuple[str, T]


def _common_prefix_len(a: Sequence[T], b: Sequence[T]) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


def _common_suffix_len(a: Sequence[T], b: Sequence[T]) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[len(a) - 1 - i] == b[len(b) - 1 - i]:
        i += 1
    return i


def edit_script(a: Sequence[T], b: Sequence[T]) -> list[EditStep]:
    """Minimal edit script turning ``a`` into ``b``.

    Ties are broken so that matches are taken as early as possible and
    deletions precede insertions at the same position, which keeps output
    deterministic across runs.
    """
    pre = _common_prefix_len(a, b)
    suf = _common_suffix_len(a[pre:], b[pre:])
    core_a = a[pre : len(a) - suf]
    core_b = b[pre : len(b) - suf]

    script: list[EditStep] = [("equal", a[i]) for i in range(pre)]
    script.extend(_myers(core_a, core_b))
    script.extend(("equal", a[i]) for i in range(len(a) - suf, len(a)))
    return script


def edit_distance(a: Sequence[T], b: Sequence[T]) -> int:
    """Number of insertions + deletions in a minimal edit script."""
    pre = _common_prefix_len(a, b)
    suf = _common_suffix_len(a[pre:], b[pre:])
    core_a = a[pre : len(a) - suf]
    core_b = b[pre : len(b) - suf]
    n, m = len(core_a), len(core_b)
    if n == 0 or m == 0:
        return n + m

    # Forward pass only; no trace kept, so memory stays O(N + M).
    max_d = n + m
    v = {1: 0}
    for d in range(max_d + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v.get(k - 1, -1) < v.get(k + 1, -1)):
                x = v.get(k + 1, 0)
            else:
                x = v.get(k - 1, 0) + 1
            y = x - k
            while x < n and y < m and core_a[x] == core_b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                return d
    raise AssertionError("unreachable: D bounded by len(a) + len(b)")


def lcs_length(a: Sequence[T], b: Sequence[T]) -> int:
    """Length of the longest common subsequence of ``a`` and ``b``."""
    return (len(a) + len(b) - edit_distance(a, b)) // 2


def _myers(a: Sequence[T], b: Sequence[T]) -> list[EditStep]:
    n, m = len(a), len(b)
    if n == 0:
        return [("insert", item) for item in b]
    if m == 0:
        return [("delete", item) for item in a]

    # Greedy forward search, keeping one V array snapshot per D for the
    # backtracking pass.
    max_d = n + m
    v = {1: 0}
    trace: list[dict[int, int]] = []
    found_d = -1
    for d in range(max_d + 1):
        trace.append(dict(v))
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v.get(k - 1, -1) < v.get(k + 1, -1)):
                x = v.get(k + 1, 0)
            else:
                x = v.get(k - 1, 0) + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                found_d = d
                break
        if found_d >= 0:
            break
    assert found_d >= 0

    # Backtrack from (n, m) to (0, 0), collecting steps in reverse.
    reversed_steps: list[EditStep] = []
    x, y = n, m
    for d in range(found_d, 0, -1):
        snapshot = trace[d]
        k = x - y
        if k == -d or (k != d and snapshot.get(k - 1, -1) < snapshot.get(k + 1, -1)):
            prev_k = k + 1
        else:
            prev_k = k - 1
        prev_x = snapshot[prev_k]
        prev_y = prev_x - prev_k
        while x > prev_x and y > prev_y:
            x -= 1
            y -= 1
            reversed_steps.append(("equal", a[x]))
        if x == prev_x:
            y -= 1
            reversed_steps.append(("insert", b[y]))
        else:
            x -= 1
            reversed_steps.append(("delete", a[x]))
    while x > 0 and y > 0:
        x -= 1
        y -= 1
        reversed_steps.append(("equal", a[x]))

    reversed_steps.reverse()
    return reversed_steps

"""Unit-cost Levenshtein edit distance over Unicode scalar values."""

from __future__ import annotations


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character insertions, deletions, and
    substitutions transforming ``a`` into ``b``.

    Two-row dynamic programming, O(len(a) * len(b)) time and O(len(b))
    space.  Operates on code points, so astral characters count as one
    edit each.
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[len(b)]


def nearest(word: str, candidates: list[str], max_distance: int = 3) -> str | None:
    """Closest candidate within ``max_distance`` edits, ties broken by
    candidate order; comparison is case-insensitive."""
    best: str | None = None
    best_d = max_distance + 1
    lowered = word.lower()
    for cand in candidates:
        d = levenshtein(lowered, cand.lower())
        if d < best_d:
            best, best_d = cand, d
    return best

"""Validation of the regular-expression subset accepted by REGEXP_CONTAINS.

Only a conservative core is admitted so that every accepted pattern
behaves identically across mainstream regex engines: literals, escaped
metacharacters, the \\d \\w \\s shorthands (and their negations),
character classes with ranges, alternation, plain groups, the anchors
``^`` and ``$``, the ``.`` wildcard, the ``*`` ``+`` ``?`` quantifiers,
and a single leading ``(?i)`` flag.  Everything else — counted
repetition, lookaround, backreferences, lazy quantifiers, inline group
options — is rejected up front rather than silently misbehaving.
"""

from __future__ import annotations

import re

_CLASS_SHORTHANDS = "dDwWsS"
_ESCAPABLE = set("\\^$.|?*+()[]{}/-'\"` ")


class UnsupportedPattern(ValueError):
    """Raised when a pattern falls outside the supported subset."""

    def __init__(self, reason: str, index: int) -> None:
        super().__init__(reason)
        self.reason = reason
        self.index = index


def _check_escape(pattern: str, i: int) -> int:
    """Validate the escape starting at ``pattern[i] == '\\'``; return next index."""
    if i + 1 >= len(pattern):
        raise UnsupportedPattern("dangling backslash", i)
    nxt = pattern[i + 1]
    if nxt in _CLASS_SHORTHANDS or nxt in _ESCAPABLE:
        return i + 2
    raise UnsupportedPattern(f"unsupported escape '\\{nxt}'", i)


def _check_class(pattern: str, i: int) -> int:
    """Validate the character class starting at ``pattern[i] == '['``."""
    start = i
    i += 1
    if i < len(pattern) and pattern[i] == "^":
        i += 1
    seen_item = False
    if i < len(pattern) and pattern[i] == "]":  # leading ']' is a literal
        i += 1
        seen_item = True
    while i < len(pattern):
        ch = pattern[i]
        if ch == "]":
            if not seen_item:
                raise UnsupportedPattern("empty character class", start)
            return i + 1
        if ch == "\\":
            i = _check_escape(pattern, i)
            seen_item = True
            continue
        if ch == "[":
            # POSIX classes like [:alpha:] are not supported; a bare '['
            # inside a class is ambiguous, so refuse it outright.
            raise UnsupportedPattern("'[' inside character class", i)
        i += 1
        seen_item = True
    raise UnsupportedPattern("unterminated character class", start)


def validate_pattern(pattern: str) -> None:
    """Raise :class:`UnsupportedPattern` unless ``pattern`` is in the subset."""
    i = 0
    n = len(pattern)
    if pattern.startswith("(?i)"):
        i = 4
    depth = 0
    quantifiable = False
    while i < n:
        ch = pattern[i]
        if ch == "\\":
            i = _check_escape(pattern, i)
            quantifiable = True
        elif ch == "[":
            i = _check_class(pattern, i)
            quantifiable = True
        elif ch == "(":
            if pattern.startswith("(?", i):
                raise UnsupportedPattern(
                    "group options and lookaround are not supported", i
                )
            depth += 1
            i += 1
            quantifiable = False
        elif ch == ")":
            if depth == 0:
                raise UnsupportedPattern("unbalanced ')'", i)
            depth -= 1
            i += 1
            quantifiable = True
        elif ch in "*+?":
            if not quantifiable:
                raise UnsupportedPattern(f"nothing to repeat before '{ch}'", i)
            if i + 1 < n and pattern[i + 1] == "?":
                raise UnsupportedPattern("lazy quantifiers are not supported", i + 1)
            i += 1
            quantifiable = False
        elif ch == "{":
            raise UnsupportedPattern("counted repetition is not supported", i)
        elif ch == "|":
            i += 1
            quantifiable = False
        elif ch in "^$":
            i += 1
            quantifiable = False
        else:
            i += 1
            quantifiable = True
    if depth:
        raise UnsupportedPattern("unbalanced '('", n - 1)
    # Belt and braces: anything that passed must also compile.
    try:
        re.compile(pattern)
    except re.error as exc:  # pragma: no cover - subset should preclude this
        raise UnsupportedPattern(str(exc), 0) from exc


def compile_pattern(pattern: str) -> re.Pattern[str]:
    """Validate then compile; callers get a ready-to-search pattern."""
    validate_pattern(pattern)
    return re.compile(pattern)

"""Classified query errors and their frozen text rendering.

The formatted error block is part of the product's contract: it is the
exact payload embedded in correction prompts and asserted bit-for-bit by
tests, so changes here are breaking changes.
"""

from __future__ import annotations

import enum


class ErrorKind(enum.Enum):
    LEX = "LexError"
    PARSE = "ParseError"
    BIND = "BindError"
    PATTERN = "PatternError"
    LIMIT = "LimitError"


class ErrorGroup(enum.Enum):
    SYNTAX = "Syntax"
    SEMANTIC = "Semantic"
    RESOURCE = "Resource"


class QueryError(Exception):
    """A failure from any engine stage, with position and optional hint.

    ``position`` is (line, column), both 1-based; it is always present for
    lex, parse, and bind errors.  ``source_line`` is the offending line of
    the query text when available, used for the caret rendering.
    """

    def __init__(
        self,
        kind: ErrorKind,
        message: str,
        *,
        position: tuple[int, int] | None = None,
        token: str | None = None,
        hint: str | None = None,
        source_line: str | None = None,
    ) -> None:
        if not message:
            raise ValueError("QueryError message must be non-empty")
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.position = position
        self.token = token
        self.hint = hint
        self.source_line = source_line


def source_line_at(text: str, line: int) -> str | None:
    """Return the 1-based ``line`` of ``text``, or None if out of range."""
    lines = text.split("\n")
    if 1 <= line <= len(lines):
        return lines[line - 1]
    return None


def classify_error(err: QueryError) -> ErrorGroup:
    """Map an engine error to its correction-loop group.

    Lex, parse, bind, and pattern failures are all automatically
    detectable and therefore syntactic from the loop's point of view;
    only the row-count guard is a resource failure.  The semantic group
    exists solely for human judgments: a wrong-but-executable query never
    raises, so the engine never produces it.
    """
    if err.kind is ErrorKind.LIMIT:
        return ErrorGroup.RESOURCE
    return ErrorGroup.SYNTAX


def format_error(err: QueryError) -> str:
    """Render the deterministic error block fed back to the model.

    Layout (frozen, see docs/sql-subset.md):

        <Kind>: <message> (line L, column C)
          <offending source line>
          <caret under the column>
        did you mean '<hint>'?

    Position, source line, and hint lines appear only when available.
    """
    first = f"{err.kind.value}: {err.message}"
    if err.position is not None:
        line, column = err.position
        first += f" (line {line}, column {column})"
    lines = [first]
    if err.position is not None and err.source_line is not None:
        _, column = err.position
        lines.append("  " + err.source_line)
        lines.append("  " + " " * (column - 1) + "^")
    if err.hint:
        lines.append(f"did you mean '{err.hint}'?")
    return "\n".join(lines)

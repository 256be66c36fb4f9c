"""Tokenizer for the supported SQL subset."""

from __future__ import annotations

from dataclasses import dataclass

from cohortql.sqlengine.errors import ErrorKind, QueryError, source_line_at

# Token kinds
NAME = "name"
BACKTICK_NAME = "bname"
STRING = "string"
INT = "int"
SYMBOL = "symbol"
EOF = "eof"

SYMBOLS = ("<=", ">=", "!=", "<", ">", "=", "(", ")", ",", "*", ".")

KEYWORDS = {
    "SELECT",
    "DISTINCT",
    "FROM",
    "WHERE",
    "GROUP",
    "ORDER",
    "BY",
    "ASC",
    "DESC",
    "LIMIT",
    "AND",
    "OR",
    "NOT",
    "LIKE",
    "IN",
    "AS",
}


@dataclass(frozen=True)
class Token:
    kind: str
    value: str  # decoded value (string contents, symbol text, name as written)
    line: int
    col: int
    lexeme: str = ""
    raw: bool = False  # raw string literal (r'...')

    def is_keyword(self, *words: str) -> bool:
        return self.kind == NAME and self.value.upper() in words

    def describe(self) -> str:
        if self.kind == EOF:
            return "end of input"
        if self.kind == STRING:
            return "string literal"
        return f"'{self.lexeme or self.value}'"


class Lexer:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _error(self, message: str, line: int, col: int) -> QueryError:
        return QueryError(
            ErrorKind.LEX,
            message,
            position=(line, col),
            source_line=source_line_at(self.text, line),
        )

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def _advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def _skip_space(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self._advance()

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        while True:
            self._skip_space()
            if self.pos >= len(self.text):
                out.append(Token(EOF, "", self.line, self.col))
                return out
            out.append(self._next_token())

    def _next_token(self) -> Token:
        line, col = self.line, self.col
        ch = self._peek()

        if ch == "'":
            return self._string(line, col, raw=False)

        if ch in "rR" and self._peek(1) == "'":
            self._advance()
            return self._string(line, col, raw=True)

        if ch == "`":
            return self._backtick_name(line, col)

        if ch.isdigit():
            start = self.pos
            while self._peek().isdigit():
                self._advance()
            if self._peek().isalpha() or self._peek() == "_":
                bad = self._peek()
                raise self._error(
                    f"unexpected character '{bad}' in number", self.line, self.col
                )
            text = self.text[start : self.pos]
            return Token(INT, text, line, col, lexeme=text)

        if ch.isalpha() or ch == "_":
            start = self.pos
            while self._peek().isalnum() or self._peek() == "_":
                self._advance()
            text = self.text[start : self.pos]
            return Token(NAME, text, line, col, lexeme=text)

        for sym in SYMBOLS:
            if self.text.startswith(sym, self.pos):
                for _ in sym:
                    self._advance()
                return Token(SYMBOL, sym, line, col, lexeme=sym)

        if ch == "!":
            raise self._error("expected '=' after '!'", line, col)
        raise self._error(f"unexpected character '{ch}'", line, col)

    def _string(self, line: int, col: int, raw: bool) -> Token:
        start = self.pos
        self._advance()  # opening quote
        parts: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self._error("unterminated string literal", line, col)
            ch = self._advance()
            if ch == "\n":
                raise self._error("unterminated string literal", line, col)
            if ch == "'":
                if self._peek() == "'":  # '' escape
                    self._advance()
                    parts.append("'")
                    continue
                break
            parts.append(ch)
        lexeme = self.text[start - (1 if raw else 0) : self.pos]
        return Token(STRING, "".join(parts), line, col, lexeme=lexeme, raw=raw)

    def _backtick_name(self, line: int, col: int) -> Token:
        start = self.pos
        self._advance()  # opening backtick
        while True:
            if self.pos >= len(self.text):
                raise self._error("unterminated backtick identifier", line, col)
            ch = self._advance()
            if ch == "\n":
                raise self._error("unterminated backtick identifier", line, col)
            if ch == "`":
                break
        lexeme = self.text[start : self.pos]
        value = lexeme[1:-1]
        if not value:
            raise self._error("empty backtick identifier", line, col)
        for c in value:
            if not (c.isalnum() or c in "_.-"):
                raise self._error(
                    f"invalid character '{c}' in backtick identifier", line, col
                )
        return Token(BACKTICK_NAME, value, line, col, lexeme=lexeme)


def tokenize(text: str) -> list[Token]:
    return Lexer(text).tokens()

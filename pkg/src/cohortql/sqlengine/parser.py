"""Recursive-descent parser producing :mod:`cohortql.sqlengine.nodes` trees.

Grammar (see docs/sql-subset.md for the authoritative EBNF):

    query     = SELECT [DISTINCT] select_list FROM table
                [WHERE bool_expr] [GROUP BY columns]
                [ORDER BY order_items] [LIMIT integer]
    bool_expr = or-chains of and-chains of NOT/predicates, with
                parentheses for grouping.

Function names (COUNT, LOWER, UPPER, REGEXP_CONTAINS) are contextual:
they only act as functions when followed by '('.
"""

from __future__ import annotations

from cohortql.sqlengine.errors import ErrorKind, QueryError, source_line_at
from cohortql.sqlengine.lexer import (
    BACKTICK_NAME,
    EOF,
    INT,
    NAME,
    STRING,
    SYMBOL,
    Token,
    tokenize,
)
from cohortql.sqlengine.nodes import (
    And,
    BoolExpr,
    Cmp,
    ColumnRef,
    CountDistinct,
    CountStar,
    Expr,
    FuncCall,
    InList,
    IntLit,
    Like,
    Not,
    Or,
    OrderItem,
    QueryAst,
    RegexpContains,
    SelectItem,
    Star,
    StringLit,
)

RESERVED = {
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

CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")

SCALAR_FUNCS = {"LOWER", "UPPER"}


class Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    # -- plumbing ---------------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def _advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != EOF:
            self.i += 1
        return tok

    def _error(self, message: str, tok: Token | None = None) -> QueryError:
        tok = tok or self.cur
        return QueryError(
            ErrorKind.PARSE,
            message,
            position=(tok.line, tok.col),
            token=tok.lexeme or tok.value or None,
            source_line=source_line_at(self.text, tok.line),
        )

    def _unexpected(self, tok: Token | None = None) -> QueryError:
        tok = tok or self.cur
        return self._error(f"unexpected {tok.describe()}", tok)

    def _expect_symbol(self, sym: str) -> Token:
        tok = self.cur
        if tok.kind == SYMBOL and tok.value == sym:
            return self._advance()
        raise self._error(f"expected '{sym}', found {tok.describe()}", tok)

    def _expect_keyword(self, word: str) -> Token:
        tok = self.cur
        if tok.is_keyword(word):
            return self._advance()
        raise self._error(f"expected {word}, found {tok.describe()}", tok)

    def _at_symbol(self, *syms: str) -> bool:
        return self.cur.kind == SYMBOL and self.cur.value in syms

    def _eat_symbol(self, sym: str) -> bool:
        if self._at_symbol(sym):
            self._advance()
            return True
        return False

    def _eat_keyword(self, *words: str) -> Token | None:
        if self.cur.is_keyword(*words):
            return self._advance()
        return None

    # -- grammar ----------------------------------------------------------

    def parse(self) -> QueryAst:
        self._expect_keyword("SELECT")
        distinct = self._eat_keyword("DISTINCT") is not None
        select_list = self._select_list()
        self._expect_keyword("FROM")
        from_tok = self.cur
        from_table = self._table_name()

        where = None
        if self._eat_keyword("WHERE"):
            where = self._bool_expr()

        group_by: tuple[ColumnRef, ...] = ()
        if self._eat_keyword("GROUP"):
            self._expect_keyword("BY")
            group_by = self._column_list()

        order_by: tuple[OrderItem, ...] = ()
        if self._eat_keyword("ORDER"):
            self._expect_keyword("BY")
            order_by = self._order_list()

        limit = None
        if self._eat_keyword("LIMIT"):
            tok = self.cur
            if tok.kind != INT:
                raise self._error(
                    f"expected integer after LIMIT, found {tok.describe()}", tok
                )
            self._advance()
            limit = int(tok.value)

        if self.cur.kind != EOF:
            raise self._unexpected()

        return QueryAst(
            select_list=select_list,
            from_table=from_table,
            distinct=distinct,
            where=where,
            group_by=group_by,
            order_by=order_by,
            limit=limit,
            from_pos=(from_tok.line, from_tok.col),
            source=self.text,
        )

    def _select_list(self) -> tuple[SelectItem, ...] | Star:
        if self._at_symbol("*"):
            tok = self._advance()
            return Star(pos=(tok.line, tok.col))
        items = [self._select_item()]
        while self._eat_symbol(","):
            items.append(self._select_item())
        return tuple(items)

    def _select_item(self) -> SelectItem:
        expr = self._expr()
        alias = None
        if self._eat_keyword("AS"):
            tok = self.cur
            if tok.kind != NAME or tok.value.upper() in RESERVED:
                raise self._error(
                    f"expected alias name after AS, found {tok.describe()}", tok
                )
            self._advance()
            alias = tok.value
        elif self.cur.kind == NAME and self.cur.value.upper() not in RESERVED:
            alias = self._advance().value
        return SelectItem(expr=expr, alias=alias)

    def _table_name(self) -> str:
        tok = self.cur
        if tok.kind == BACKTICK_NAME:
            self._advance()
            return tok.value
        if tok.kind == NAME and tok.value.upper() not in RESERVED:
            parts = [self._advance().value]
            while self._at_symbol("."):
                self._advance()
                nxt = self.cur
                if nxt.kind != NAME:
                    raise self._error(
                        f"expected name after '.', found {nxt.describe()}", nxt
                    )
                parts.append(self._advance().value)
            return ".".join(parts)
        raise self._error(f"expected table name, found {tok.describe()}", tok)

    def _column_ref(self) -> ColumnRef:
        tok = self.cur
        if tok.kind == BACKTICK_NAME:
            self._advance()
            return ColumnRef(
                parts=tuple(tok.value.split(".")), pos=(tok.line, tok.col)
            )
        if tok.kind != NAME or tok.value.upper() in RESERVED:
            raise self._error(f"expected column name, found {tok.describe()}", tok)
        parts = [self._advance().value]
        while self._at_symbol("."):
            self._advance()
            nxt = self.cur
            if nxt.kind != NAME:
                raise self._error(
                    f"expected name after '.', found {nxt.describe()}", nxt
                )
            parts.append(self._advance().value)
        return ColumnRef(parts=tuple(parts), pos=(tok.line, tok.col))

    def _column_list(self) -> tuple[ColumnRef, ...]:
        cols = [self._column_ref()]
        while self._eat_symbol(","):
            cols.append(self._column_ref())
        return tuple(cols)

    def _order_list(self) -> tuple[OrderItem, ...]:
        items = [self._order_item()]
        while self._eat_symbol(","):
            items.append(self._order_item())
        return tuple(items)

    def _order_item(self) -> OrderItem:
        expr = self._expr()
        descending = False
        if self._eat_keyword("DESC"):
            descending = True
        else:
            self._eat_keyword("ASC")
        return OrderItem(expr=expr, descending=descending)

    # -- scalar expressions ----------------------------------------------

    def _expr(self) -> Expr:
        tok = self.cur
        if tok.kind == STRING:
            self._advance()
            return StringLit(tok.value, raw=tok.raw, pos=(tok.line, tok.col))
        if tok.kind == INT:
            self._advance()
            return IntLit(int(tok.value), pos=(tok.line, tok.col))
        if tok.kind == NAME and self._peek_symbol_after(tok, "("):
            return self._func_call()
        if tok.kind == NAME and tok.value.upper() in RESERVED:
            raise self._error(f"expected expression, found {tok.describe()}", tok)
        if tok.kind in (NAME, BACKTICK_NAME):
            return self._column_ref()
        raise self._error(f"expected expression, found {tok.describe()}", tok)

    def _peek_symbol_after(self, tok: Token, sym: str) -> bool:
        nxt = self.toks[self.i + 1] if self.i + 1 < len(self.toks) else None
        return nxt is not None and nxt.kind == SYMBOL and nxt.value == sym

    def _func_call(self) -> Expr:
        tok = self._advance()
        fname = tok.value.upper()
        pos = (tok.line, tok.col)
        self._expect_symbol("(")
        if fname == "COUNT":
            if self._eat_symbol("*"):
                self._expect_symbol(")")
                return CountStar(pos=pos)
            if self._eat_keyword("DISTINCT"):
                col = self._column_ref()
                self._expect_symbol(")")
                return CountDistinct(column=col, pos=pos)
            col = self._column_ref()
            self._expect_symbol(")")
            return FuncCall(name="COUNT", args=(col,), pos=pos)
        if fname in SCALAR_FUNCS:
            arg = self._expr()
            self._expect_symbol(")")
            return FuncCall(name=fname, args=(arg,), pos=pos)
        raise self._error(f"unknown function '{tok.value}'", tok)

    def _literal(self) -> Expr:
        tok = self.cur
        if tok.kind == STRING:
            self._advance()
            return StringLit(tok.value, raw=tok.raw, pos=(tok.line, tok.col))
        if tok.kind == INT:
            self._advance()
            return IntLit(int(tok.value), pos=(tok.line, tok.col))
        raise self._error(f"expected literal, found {tok.describe()}", tok)

    # -- boolean expressions ---------------------------------------------

    def _bool_expr(self) -> BoolExpr:
        return self._or_expr()

    def _or_expr(self) -> BoolExpr:
        node = self._and_expr()
        while self._eat_keyword("OR"):
            node = Or(lhs=node, rhs=self._and_expr())
        return node

    def _and_expr(self) -> BoolExpr:
        node = self._not_expr()
        while self._eat_keyword("AND"):
            node = And(lhs=node, rhs=self._not_expr())
        return node

    def _not_expr(self) -> BoolExpr:
        if self._eat_keyword("NOT"):
            return Not(operand=self._not_expr())
        return self._predicate()

    def _predicate(self) -> BoolExpr:
        if self._at_symbol("("):
            self._advance()
            node = self._bool_expr()
            self._expect_symbol(")")
            return node

        tok = self.cur
        if tok.kind == NAME and tok.value.upper() == "REGEXP_CONTAINS":
            if not self._peek_symbol_after(tok, "("):
                raise self._error("expected '(' after REGEXP_CONTAINS", tok)
            self._advance()
            self._advance()  # '('
            expr = self._expr()
            self._expect_symbol(",")
            pat_tok = self.cur
            if pat_tok.kind != STRING:
                raise self._error(
                    f"expected string pattern, found {pat_tok.describe()}", pat_tok
                )
            self._advance()
            pattern = StringLit(
                pat_tok.value, raw=pat_tok.raw, pos=(pat_tok.line, pat_tok.col)
            )
            self._expect_symbol(")")
            return RegexpContains(expr=expr, pattern=pattern)

        lhs = self._expr()

        negated = self._eat_keyword("NOT") is not None
        if self._eat_keyword("LIKE"):
            pat_tok = self.cur
            if pat_tok.kind != STRING:
                raise self._error(
                    f"expected string pattern after LIKE, found {pat_tok.describe()}",
                    pat_tok,
                )
            self._advance()
            pattern = StringLit(
                pat_tok.value, raw=pat_tok.raw, pos=(pat_tok.line, pat_tok.col)
            )
            return Like(expr=lhs, pattern=pattern, negated=negated)
        if self._eat_keyword("IN"):
            self._expect_symbol("(")
            items = [self._literal()]
            while self._eat_symbol(","):
                items.append(self._literal())
            self._expect_symbol(")")
            return InList(expr=lhs, items=tuple(items), negated=negated)
        if negated:
            raise self._error(
                f"expected LIKE or IN after NOT, found {self.cur.describe()}"
            )

        if self._at_symbol(*CMP_OPS):
            op = self._advance().value
            rhs = self._expr()
            return Cmp(lhs=lhs, op=op, rhs=rhs)

        raise self._error(f"expected comparison, found {self.cur.describe()}")


def parse_query(text: str) -> QueryAst:
    """Parse ``text`` into a query tree, raising :class:`QueryError` on failure."""
    return Parser(text).parse()

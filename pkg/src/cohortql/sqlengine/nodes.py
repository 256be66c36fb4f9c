"""AST node types for the supported SQL subset.

Positions are carried for error reporting but excluded from equality so
that a pretty-printed and re-parsed query compares equal to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Pos = "tuple[int, int] | None"


@dataclass(frozen=True)
class ColumnRef:
    # Dotted references keep all segments; binding resolves the last one.
    parts: tuple[str, ...]
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    @property
    def name(self) -> str:
        return ".".join(self.parts)


@dataclass(frozen=True)
class StringLit:
    value: str
    raw: bool = False
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FuncCall:
    name: str  # LOWER | UPPER | COUNT | REGEXP_CONTAINS, upper-cased
    args: tuple["Expr", ...]
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CountStar:
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CountDistinct:
    column: ColumnRef
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


Expr = Union[ColumnRef, StringLit, IntLit, FuncCall, CountStar, CountDistinct]


@dataclass(frozen=True)
class Cmp:
    lhs: Expr
    op: str  # = != < <= > >=
    rhs: Expr


@dataclass(frozen=True)
class Like:
    expr: Expr
    pattern: StringLit  # % and _ wildcards only
    negated: bool = False


@dataclass(frozen=True)
class InList:
    expr: Expr
    items: tuple[Expr, ...]  # literals only
    negated: bool = False


@dataclass(frozen=True)
class RegexpContains:
    expr: Expr
    pattern: StringLit


@dataclass(frozen=True)
class And:
    lhs: "BoolExpr"
    rhs: "BoolExpr"


@dataclass(frozen=True)
class Or:
    lhs: "BoolExpr"
    rhs: "BoolExpr"


@dataclass(frozen=True)
class Not:
    operand: "BoolExpr"


BoolExpr = Union[Cmp, Like, InList, RegexpContains, And, Or, Not]


@dataclass(frozen=True)
class Star:
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class QueryAst:
    select_list: tuple[SelectItem, ...] | Star
    from_table: str  # backticks stripped
    distinct: bool = False
    where: BoolExpr | None = None
    group_by: tuple[ColumnRef, ...] = ()
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None
    from_pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)
    source: str | None = field(default=None, compare=False, repr=False)


def contains_aggregate(expr: Expr) -> bool:
    if isinstance(expr, (CountStar, CountDistinct)):
        return True
    if isinstance(expr, FuncCall):
        if expr.name == "COUNT":
            return True
        return any(contains_aggregate(a) for a in expr.args)
    return False


def bool_expr_exprs(node: BoolExpr):
    """Yield every scalar expression inside a boolean tree."""
    if isinstance(node, Cmp):
        yield node.lhs
        yield node.rhs
    elif isinstance(node, (Like, RegexpContains)):
        yield node.expr
        yield node.pattern
    elif isinstance(node, InList):
        yield node.expr
        yield from node.items
    elif isinstance(node, Not):
        yield from bool_expr_exprs(node.operand)
    elif isinstance(node, (And, Or)):
        yield from bool_expr_exprs(node.lhs)
        yield from bool_expr_exprs(node.rhs)

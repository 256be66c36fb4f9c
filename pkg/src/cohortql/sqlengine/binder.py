"""Name resolution and type checking: turns a parsed tree into a QueryPlan.

The plan is a fully resolved form — column references become positional
indexes into catalog rows, LIKE patterns become compiled regular
expressions, date literals become ``datetime.date`` — so the evaluator
never touches names or raw literals again.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from typing import Union

from cohortql.catalog import Catalog, ColumnType, TableSchema, UnknownTableError
from cohortql.distance import nearest
from cohortql.sqlengine import nodes
from cohortql.sqlengine.errors import ErrorKind, QueryError, source_line_at
from cohortql.sqlengine.patterns import UnsupportedPattern, validate_pattern

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


# -- bound scalar expressions ------------------------------------------------


@dataclass(frozen=True)
class BCol:
    index: int
    name: str
    type: ColumnType


@dataclass(frozen=True)
class BLit:
    value: Union[str, int, date]
    type: ColumnType


@dataclass(frozen=True)
class BFunc:
    name: str  # LOWER | UPPER
    arg: "BScalar"
    type: ColumnType = ColumnType.TEXT


@dataclass(frozen=True)
class BCountStar:
    type: ColumnType = ColumnType.INTEGER


@dataclass(frozen=True)
class BCountCol:
    index: int
    type: ColumnType = ColumnType.INTEGER


@dataclass(frozen=True)
class BCountDistinct:
    index: int
    type: ColumnType = ColumnType.INTEGER


BScalar = Union[BCol, BLit, BFunc]
BAgg = Union[BCountStar, BCountCol, BCountDistinct]


# -- bound predicates --------------------------------------------------------


@dataclass(frozen=True)
class BCmp:
    lhs: BScalar
    op: str
    rhs: BScalar


@dataclass(frozen=True)
class BLike:
    expr: BScalar
    pattern: str  # original LIKE pattern, kept for printing/debugging
    regex: re.Pattern = field(compare=False, repr=False, default=None)  # type: ignore[assignment]
    negated: bool = False


@dataclass(frozen=True)
class BIn:
    expr: BScalar
    values: tuple[Union[str, int, date], ...]
    negated: bool = False


@dataclass(frozen=True)
class BRegexp:
    expr: BScalar
    pattern: str
    regex: re.Pattern = field(compare=False, repr=False, default=None)  # type: ignore[assignment]


@dataclass(frozen=True)
class BAnd:
    lhs: "BPred"
    rhs: "BPred"


@dataclass(frozen=True)
class BOr:
    lhs: "BPred"
    rhs: "BPred"


@dataclass(frozen=True)
class BNot:
    operand: "BPred"


BPred = Union[BCmp, BLike, BIn, BRegexp, BAnd, BOr, BNot]


# -- plan --------------------------------------------------------------------


@dataclass(frozen=True)
class BItem:
    name: str
    expr: Union[BScalar, BAgg]
    aggregate: bool


@dataclass(frozen=True)
class BOrderKey:
    # source: "output" sorts on a projected column, "input" on an
    # underlying row column, "group" on a grouping key position.
    source: str
    index: int
    descending: bool = False


@dataclass(frozen=True)
class QueryPlan:
    table: str
    schema: TableSchema
    items: tuple[BItem, ...]
    distinct: bool
    where: BPred | None
    group_by: tuple[int, ...]
    grouped: bool
    order: tuple[BOrderKey, ...]
    limit: int | None

    @property
    def column_names(self) -> list[str]:
        return [item.name for item in self.items]

    @property
    def column_types(self) -> list[ColumnType]:
        return [_expr_type(item.expr) for item in self.items]


def _expr_type(expr: Union[BScalar, BAgg]) -> ColumnType:
    return expr.type


# -- binding -----------------------------------------------------------------


class _Binder:
    def __init__(self, ast: nodes.QueryAst, catalog: Catalog) -> None:
        self.ast = ast
        self.catalog = catalog
        self.source = ast.source or ""

    def _err(
        self,
        message: str,
        pos: tuple[int, int] | None,
        *,
        kind: ErrorKind = ErrorKind.BIND,
        token: str | None = None,
        hint: str | None = None,
    ) -> QueryError:
        line = source_line_at(self.source, pos[0]) if pos else None
        return QueryError(
            kind,
            message,
            position=pos,
            token=token,
            hint=hint,
            source_line=line,
        )

    def bind(self) -> QueryPlan:
        ast = self.ast
        try:
            schema = self.catalog.schema(ast.from_table)
        except UnknownTableError:
            hint = nearest(
                ast.from_table.split(".")[-1], self.catalog.table_names
            )
            raise self._err(
                f"unknown table '{ast.from_table}'",
                ast.from_pos,
                token=ast.from_table,
                hint=hint,
            ) from None
        self.schema = schema

        where = self._bind_pred(ast.where) if ast.where is not None else None

        group_by: list[int] = []
        for col in ast.group_by:
            group_by.append(self._resolve_column(col).index)

        items = self._bind_select(ast, group_by)
        grouped = bool(group_by) or any(i.aggregate for i in items)

        if grouped:
            # Covers the bare-aggregate case too: with no GROUP BY, any
            # non-aggregate item fails the membership test below.
            for item, node in zip(items, self._select_nodes(ast)):
                if not item.aggregate and not (
                    isinstance(item.expr, BCol) and item.expr.index in group_by
                ):
                    raise self._err(
                        f"column '{item.name}' must appear in GROUP BY",
                        _node_pos(node.expr),
                    )

        order = self._bind_order(ast, items, group_by, grouped)

        return QueryPlan(
            table=self.catalog.canonical_name(ast.from_table),
            schema=schema,
            items=tuple(items),
            distinct=ast.distinct,
            where=where,
            group_by=tuple(group_by),
            grouped=grouped,
            order=order,
            limit=ast.limit,
        )

    # -- select list ----------------------------------------------------

    def _select_nodes(self, ast: nodes.QueryAst) -> tuple[nodes.SelectItem, ...]:
        if isinstance(ast.select_list, nodes.Star):
            return tuple(
                nodes.SelectItem(expr=nodes.ColumnRef(parts=(c.name,)))
                for c in self.schema.columns
            )
        return ast.select_list

    def _bind_select(
        self, ast: nodes.QueryAst, group_by: list[int]
    ) -> list[BItem]:
        if isinstance(ast.select_list, nodes.Star):
            if group_by:
                raise self._err(
                    "SELECT * cannot be combined with GROUP BY",
                    ast.select_list.pos,
                )
            return [
                BItem(name=c.name, expr=BCol(i, c.name, c.type), aggregate=False)
                for i, c in enumerate(self.schema.columns)
            ]
        items: list[BItem] = []
        for i, sel in enumerate(ast.select_list):
            expr = self._bind_item_expr(sel.expr)
            aggregate = isinstance(expr, (BCountStar, BCountCol, BCountDistinct))
            if sel.alias:
                name = sel.alias
            elif isinstance(expr, BCol):
                name = expr.name
            else:
                name = f"f{i}_"
            items.append(BItem(name=name, expr=expr, aggregate=aggregate))
        return items

    def _bind_item_expr(self, expr: nodes.Expr) -> Union[BScalar, BAgg]:
        if isinstance(expr, nodes.CountStar):
            return BCountStar()
        if isinstance(expr, nodes.CountDistinct):
            return BCountDistinct(index=self._resolve_column(expr.column).index)
        if isinstance(expr, nodes.FuncCall) and expr.name == "COUNT":
            col = expr.args[0]
            assert isinstance(col, nodes.ColumnRef)
            return BCountCol(index=self._resolve_column(col).index)
        return self._bind_scalar(expr)

    # -- scalars --------------------------------------------------------

    def _resolve_column(self, ref: nodes.ColumnRef) -> BCol:
        found = self.schema.find_column(ref.name)
        if found is None:
            hint = nearest(ref.parts[-1], self.schema.column_names())
            raise self._err(
                f"unknown column '{ref.name}'",
                ref.pos,
                token=ref.name,
                hint=hint,
            )
        index, col = found
        return BCol(index=index, name=col.name, type=col.type)

    def _bind_scalar(self, expr: nodes.Expr) -> BScalar:
        if isinstance(expr, nodes.ColumnRef):
            return self._resolve_column(expr)
        if isinstance(expr, nodes.StringLit):
            return BLit(value=expr.value, type=ColumnType.TEXT)
        if isinstance(expr, nodes.IntLit):
            return BLit(value=expr.value, type=ColumnType.INTEGER)
        if isinstance(expr, nodes.FuncCall):
            if expr.name == "COUNT":
                raise self._err(
                    "aggregate function COUNT is not allowed here", expr.pos
                )
            arg = expr.args[0]
            if nodes.contains_aggregate(arg):
                raise self._err(
                    f"aggregate functions cannot be nested inside {expr.name}",
                    expr.pos,
                )
            bound = self._bind_scalar(arg)
            if bound.type is not ColumnType.TEXT:
                raise self._err(
                    f"{expr.name} requires a Text argument, got {bound.type.value}",
                    expr.pos,
                )
            return BFunc(name=expr.name, arg=bound)
        if isinstance(expr, (nodes.CountStar, nodes.CountDistinct)):
            raise self._err(
                "aggregate function COUNT is not allowed here", expr.pos
            )
        raise AssertionError(f"unhandled expression {expr!r}")

    def _coerce_literal(
        self, lit: BLit, target: ColumnType, pos: tuple[int, int] | None
    ) -> BLit:
        if lit.type is target:
            return lit
        if target is ColumnType.DATE and lit.type is ColumnType.TEXT:
            text = str(lit.value)
            if not _DATE_RE.match(text):
                raise self._err(
                    f"expected a 'YYYY-MM-DD' date literal, got '{text}'", pos
                )
            try:
                parsed = date.fromisoformat(text)
            except ValueError:
                raise self._err(
                    f"expected a 'YYYY-MM-DD' date literal, got '{text}'", pos
                ) from None
            return BLit(value=parsed, type=ColumnType.DATE)
        raise self._err(
            f"cannot compare {target.value} with {lit.type.value} literal", pos
        )

    # -- predicates -----------------------------------------------------

    def _bind_pred(self, node: nodes.BoolExpr) -> BPred:
        if isinstance(node, nodes.And):
            return BAnd(self._bind_pred(node.lhs), self._bind_pred(node.rhs))
        if isinstance(node, nodes.Or):
            return BOr(self._bind_pred(node.lhs), self._bind_pred(node.rhs))
        if isinstance(node, nodes.Not):
            return BNot(self._bind_pred(node.operand))
        if isinstance(node, nodes.Cmp):
            return self._bind_cmp(node)
        if isinstance(node, nodes.Like):
            return self._bind_like(node)
        if isinstance(node, nodes.InList):
            return self._bind_in(node)
        if isinstance(node, nodes.RegexpContains):
            return self._bind_regexp(node)
        raise AssertionError(f"unhandled predicate {node!r}")

    def _check_no_aggregate(self, expr: nodes.Expr) -> None:
        if nodes.contains_aggregate(expr):
            raise self._err(
                "aggregate functions are not allowed in WHERE",
                _node_pos(expr),
            )

    def _bind_cmp(self, node: nodes.Cmp) -> BCmp:
        self._check_no_aggregate(node.lhs)
        self._check_no_aggregate(node.rhs)
        lhs = self._bind_scalar(node.lhs)
        rhs = self._bind_scalar(node.rhs)
        # Literals adapt to the column side; two columns must agree.
        if isinstance(lhs, BLit) and not isinstance(rhs, BLit):
            lhs = self._coerce_literal(lhs, rhs.type, _node_pos(node.lhs))
        elif isinstance(rhs, BLit) and not isinstance(lhs, BLit):
            rhs = self._coerce_literal(rhs, lhs.type, _node_pos(node.rhs))
        if lhs.type is not rhs.type:
            raise self._err(
                f"cannot compare {lhs.type.value} with {rhs.type.value}",
                _node_pos(node.lhs),
            )
        return BCmp(lhs=lhs, op=node.op, rhs=rhs)

    def _require_text(self, expr: nodes.Expr, construct: str) -> BScalar:
        self._check_no_aggregate(expr)
        bound = self._bind_scalar(expr)
        if bound.type is not ColumnType.TEXT:
            raise self._err(
                f"{construct} requires a Text operand, got {bound.type.value}",
                _node_pos(expr),
            )
        return bound

    def _bind_like(self, node: nodes.Like) -> BLike:
        bound = self._require_text(node.expr, "LIKE")
        regex = _like_regex(node.pattern.value)
        return BLike(
            expr=bound,
            pattern=node.pattern.value,
            regex=regex,
            negated=node.negated,
        )

    def _bind_in(self, node: nodes.InList) -> BIn:
        self._check_no_aggregate(node.expr)
        bound = self._bind_scalar(node.expr)
        values = []
        for item in node.items:
            lit = self._bind_scalar(item)
            assert isinstance(lit, BLit)
            lit = self._coerce_literal(lit, bound.type, _node_pos(item))
            values.append(lit.value)
        return BIn(expr=bound, values=tuple(values), negated=node.negated)

    def _bind_regexp(self, node: nodes.RegexpContains) -> BRegexp:
        bound = self._require_text(node.expr, "REGEXP_CONTAINS")
        pattern = node.pattern.value
        try:
            validate_pattern(pattern)
        except UnsupportedPattern as exc:
            raise self._err(
                f"invalid regular expression: {exc.reason}",
                node.pattern.pos,
                kind=ErrorKind.PATTERN,
                token=pattern,
            ) from None
        return BRegexp(expr=bound, pattern=pattern, regex=re.compile(pattern))

    # -- ordering -------------------------------------------------------

    def _bind_order(
        self,
        ast: nodes.QueryAst,
        items: list[BItem],
        group_by: list[int],
        grouped: bool,
    ) -> tuple[BOrderKey, ...]:
        keys: list[BOrderKey] = []
        names = [i.name.lower() for i in items]
        for term in ast.order_by:
            expr = term.expr
            # 1. A plain name matching an output column or alias.
            if isinstance(expr, nodes.ColumnRef) and len(expr.parts) == 1:
                lowered = expr.parts[0].lower()
                if lowered in names:
                    keys.append(
                        BOrderKey(
                            source="output",
                            index=names.index(lowered),
                            descending=term.descending,
                        )
                    )
                    continue
            # 2. Structural match against a select expression
            #    (covers ORDER BY COUNT(*) and friends).
            bound = self._bind_order_expr(expr)
            matched = False
            for i, item in enumerate(items):
                if item.expr == bound:
                    keys.append(
                        BOrderKey(
                            source="output", index=i, descending=term.descending
                        )
                    )
                    matched = True
                    break
            if matched:
                continue
            # 3. Fall back to the underlying table where that is sound.
            if isinstance(bound, (BCountStar, BCountCol, BCountDistinct)):
                raise self._err(
                    "ORDER BY aggregate must appear in the select list",
                    _node_pos(expr),
                )
            if grouped:
                if isinstance(bound, BCol) and bound.index in group_by:
                    keys.append(
                        BOrderKey(
                            source="group",
                            index=group_by.index(bound.index),
                            descending=term.descending,
                        )
                    )
                    continue
                raise self._err(
                    "ORDER BY expression must appear in the select list "
                    "or GROUP BY",
                    _node_pos(expr),
                )
            if ast.distinct:
                raise self._err(
                    "ORDER BY expression must appear in the select list "
                    "when DISTINCT is used",
                    _node_pos(expr),
                )
            if isinstance(bound, BCol):
                keys.append(
                    BOrderKey(
                        source="input",
                        index=bound.index,
                        descending=term.descending,
                    )
                )
                continue
            raise self._err(
                "ORDER BY expression must be a column or select-list "
                "expression",
                _node_pos(expr),
            )
        return tuple(keys)

    def _bind_order_expr(self, expr: nodes.Expr) -> Union[BScalar, BAgg]:
        if isinstance(expr, (nodes.CountStar, nodes.CountDistinct)) or (
            isinstance(expr, nodes.FuncCall) and expr.name == "COUNT"
        ):
            return self._bind_item_expr(expr)
        return self._bind_scalar(expr)


def _node_pos(expr: object) -> tuple[int, int] | None:
    return getattr(expr, "pos", None)


def _like_regex(pattern: str) -> re.Pattern:
    """Translate a LIKE pattern (% and _ wildcards) to an anchored regex."""
    out = []
    for ch in pattern:
        if ch == "%":
            out.append(".*")
        elif ch == "_":
            out.append(".")
        else:
            out.append(re.escape(ch))
    return re.compile("".join(out), re.DOTALL)


def bind_query(ast: nodes.QueryAst, catalog: Catalog) -> QueryPlan:
    """Resolve names and types against ``catalog``; raise on any mismatch."""
    return _Binder(ast, catalog).bind()

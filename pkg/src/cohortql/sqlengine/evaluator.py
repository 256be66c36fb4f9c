"""Plan evaluation over an in-memory catalog table.

Semantics notes (documented in docs/sql-subset.md):

* Any comparison, LIKE, IN, or REGEXP_CONTAINS over a Null evaluates to
  false — plain two-valued logic rather than SQL's three-valued rules.
* LIKE is an anchored full match; REGEXP_CONTAINS is an unanchored search.
* GROUP BY groups appear in first-seen order; a bare aggregate over an
  empty table still yields one row.
* ORDER BY is stable and always places Nulls last, ascending or not.
* SELECT DISTINCT deduplicates after projection, keeping first
  occurrences; LIMIT applies last.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass

from cohortql.catalog import Catalog, Cell, ColumnType
from cohortql.sqlengine.binder import (
    BAnd,
    BCmp,
    BCol,
    BCountCol,
    BCountDistinct,
    BCountStar,
    BFunc,
    BIn,
    BLike,
    BLit,
    BNot,
    BOr,
    BPred,
    BRegexp,
    BScalar,
    QueryPlan,
)
from cohortql.sqlengine.errors import ErrorKind, QueryError

DEFAULT_MAX_RESULT_ROWS = 100000

_CMP = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


@dataclass(frozen=True)
class ResultTable:
    column_names: tuple[str, ...]
    column_types: tuple[ColumnType, ...]
    rows: tuple[tuple[Cell, ...], ...]

    @property
    def row_count(self) -> int:
        return len(self.rows)


def _scalar(expr: BScalar, row: tuple[Cell, ...]) -> Cell:
    if isinstance(expr, BCol):
        return row[expr.index]
    if isinstance(expr, BLit):
        return expr.value
    if isinstance(expr, BFunc):
        val = _scalar(expr.arg, row)
        if val is None:
            return None
        assert isinstance(val, str)
        return val.lower() if expr.name == "LOWER" else val.upper()
    raise AssertionError(f"unhandled scalar {expr!r}")


def _aggregate(expr, rows: list[tuple[Cell, ...]]) -> int:
    if isinstance(expr, BCountStar):
        return len(rows)
    if isinstance(expr, BCountCol):
        return sum(1 for r in rows if r[expr.index] is not None)
    if isinstance(expr, BCountDistinct):
        return len({r[expr.index] for r in rows if r[expr.index] is not None})
    raise AssertionError(f"unhandled aggregate {expr!r}")


def _predicate(pred: BPred, row: tuple[Cell, ...]) -> bool:
    if isinstance(pred, BAnd):
        return _predicate(pred.lhs, row) and _predicate(pred.rhs, row)
    if isinstance(pred, BOr):
        return _predicate(pred.lhs, row) or _predicate(pred.rhs, row)
    if isinstance(pred, BNot):
        return not _predicate(pred.operand, row)
    if isinstance(pred, BCmp):
        lhs = _scalar(pred.lhs, row)
        rhs = _scalar(pred.rhs, row)
        if lhs is None or rhs is None:
            return False
        return bool(_CMP[pred.op](lhs, rhs))
    if isinstance(pred, BLike):
        val = _scalar(pred.expr, row)
        if val is None:
            return False
        assert isinstance(val, str)
        matched = pred.regex.fullmatch(val) is not None
        return matched != pred.negated
    if isinstance(pred, BIn):
        val = _scalar(pred.expr, row)
        if val is None:
            return False
        contained = val in pred.values
        return contained != pred.negated
    if isinstance(pred, BRegexp):
        val = _scalar(pred.expr, row)
        if val is None:
            return False
        assert isinstance(val, str)
        return pred.regex.search(val) is not None
    raise AssertionError(f"unhandled predicate {pred!r}")


class _SortCell:
    """Orders one sort-key cell: Nulls always last, optional descending."""

    __slots__ = ("rank", "value", "descending")

    def __init__(self, value: Cell, descending: bool) -> None:
        self.rank = 1 if value is None else 0
        self.value = value
        self.descending = descending

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, _SortCell):
            return NotImplemented
        return self.rank == other.rank and self.value == other.value

    def __lt__(self, other: "_SortCell") -> bool:
        if self.rank != other.rank:
            return self.rank < other.rank
        if self.rank == 1 or self.value == other.value:
            return False
        if self.descending:
            return other.value < self.value  # type: ignore[operator]
        return self.value < other.value  # type: ignore[operator]


@dataclass
class _Record:
    out: tuple[Cell, ...]
    source: tuple[Cell, ...] | None  # underlying row, when ungrouped
    group_key: tuple[Cell, ...] | None


def evaluate_query(
    plan: QueryPlan,
    catalog: Catalog,
    max_result_rows: int = DEFAULT_MAX_RESULT_ROWS,
) -> ResultTable:
    """Run ``plan`` against ``catalog``; deterministic for identical inputs."""
    rows = catalog.rows(plan.table)
    if plan.where is not None:
        filtered = [r for r in rows if _predicate(plan.where, r)]
    else:
        filtered = list(rows)

    records: list[_Record]
    if plan.grouped:
        groups: dict[tuple[Cell, ...], list[tuple[Cell, ...]]] = {}
        if not plan.group_by:
            groups[()] = filtered
        else:
            for r in filtered:
                key = tuple(r[i] for i in plan.group_by)
                groups.setdefault(key, []).append(r)
        records = []
        for key, members in groups.items():
            out = []
            for item in plan.items:
                if item.aggregate:
                    out.append(_aggregate(item.expr, members))
                else:
                    # Binder guarantees the only non-aggregates here are
                    # grouping columns.
                    assert isinstance(item.expr, BCol)
                    out.append(key[plan.group_by.index(item.expr.index)])
            records.append(_Record(out=tuple(out), source=None, group_key=key))
    else:
        records = [
            _Record(
                out=tuple(_scalar(item.expr, r) for item in plan.items),
                source=r,
                group_key=None,
            )
            for r in filtered
        ]

    if plan.distinct:
        seen: set[tuple[Cell, ...]] = set()
        deduped = []
        for rec in records:
            if rec.out not in seen:
                seen.add(rec.out)
                deduped.append(rec)
        records = deduped

    if plan.order:

        def sort_key(rec: _Record) -> tuple[_SortCell, ...]:
            cells = []
            for key in plan.order:
                if key.source == "output":
                    value = rec.out[key.index]
                elif key.source == "group":
                    assert rec.group_key is not None
                    value = rec.group_key[key.index]
                else:
                    assert rec.source is not None
                    value = rec.source[key.index]
                cells.append(_SortCell(value, key.descending))
            return tuple(cells)

        records.sort(key=sort_key)

    if plan.limit is not None:
        records = records[: plan.limit]

    if len(records) > max_result_rows:
        raise QueryError(
            ErrorKind.LIMIT,
            f"query returned {len(records)} rows, exceeding "
            f"max_result_rows = {max_result_rows}",
        )

    return ResultTable(
        column_names=tuple(plan.column_names),
        column_types=tuple(plan.column_types),
        rows=tuple(rec.out for rec in records),
    )

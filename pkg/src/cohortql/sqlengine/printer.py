"""Canonical single-line rendering of query trees.

``parse_query(pretty_print(ast))`` reproduces ``ast`` exactly (positions
aside, which are excluded from node equality), so printing is safe to
use for logging, transcripts, and round-trip tests.
"""

from __future__ import annotations

import re

from cohortql.sqlengine import nodes

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

# Binding strength for parenthesization: OR < AND < NOT < predicate.
_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_ATOM = 4


def _name(parts: tuple[str, ...]) -> str:
    joined = ".".join(parts)
    if all(_IDENT.match(p) for p in parts):
        return joined
    return f"`{joined}`"


def _table(name: str) -> str:
    if all(_IDENT.match(p) for p in name.split(".")):
        return name
    return f"`{name}`"


def _string(lit: nodes.StringLit) -> str:
    body = lit.value.replace("'", "''")
    prefix = "r" if lit.raw else ""
    return f"{prefix}'{body}'"


def _expr(e: nodes.Expr) -> str:
    if isinstance(e, nodes.ColumnRef):
        return _name(e.parts)
    if isinstance(e, nodes.StringLit):
        return _string(e)
    if isinstance(e, nodes.IntLit):
        return str(e.value)
    if isinstance(e, nodes.CountStar):
        return "COUNT(*)"
    if isinstance(e, nodes.CountDistinct):
        return f"COUNT(DISTINCT {_name(e.column.parts)})"
    if isinstance(e, nodes.FuncCall):
        args = ", ".join(_expr(a) for a in e.args)
        return f"{e.name}({args})"
    raise AssertionError(f"unhandled expression {e!r}")


def _pred(node: nodes.BoolExpr, parent_prec: int) -> str:
    if isinstance(node, nodes.Or):
        text = f"{_pred(node.lhs, _PREC_OR)} OR {_pred(node.rhs, _PREC_OR)}"
        prec = _PREC_OR
    elif isinstance(node, nodes.And):
        text = f"{_pred(node.lhs, _PREC_AND)} AND {_pred(node.rhs, _PREC_AND)}"
        prec = _PREC_AND
    elif isinstance(node, nodes.Not):
        text = f"NOT {_pred(node.operand, _PREC_NOT)}"
        prec = _PREC_NOT
    elif isinstance(node, nodes.Cmp):
        text = f"{_expr(node.lhs)} {node.op} {_expr(node.rhs)}"
        prec = _PREC_ATOM
    elif isinstance(node, nodes.Like):
        word = "NOT LIKE" if node.negated else "LIKE"
        text = f"{_expr(node.expr)} {word} {_string(node.pattern)}"
        prec = _PREC_ATOM
    elif isinstance(node, nodes.InList):
        word = "NOT IN" if node.negated else "IN"
        items = ", ".join(_expr(i) for i in node.items)
        text = f"{_expr(node.expr)} {word} ({items})"
        prec = _PREC_ATOM
    elif isinstance(node, nodes.RegexpContains):
        text = f"REGEXP_CONTAINS({_expr(node.expr)}, {_string(node.pattern)})"
        prec = _PREC_ATOM
    else:
        raise AssertionError(f"unhandled predicate {node!r}")
    if prec < parent_prec:
        return f"({text})"
    return text


def pretty_print(ast: nodes.QueryAst) -> str:
    parts = ["SELECT"]
    if ast.distinct:
        parts.append("DISTINCT")
    if isinstance(ast.select_list, nodes.Star):
        parts.append("*")
    else:
        rendered = []
        for item in ast.select_list:
            text = _expr(item.expr)
            if item.alias:
                text += f" AS {item.alias}"
            rendered.append(text)
        parts.append(", ".join(rendered))
    parts.append("FROM")
    parts.append(_table(ast.from_table))
    if ast.where is not None:
        parts.append("WHERE")
        parts.append(_pred(ast.where, _PREC_OR))
    if ast.group_by:
        parts.append("GROUP BY")
        parts.append(", ".join(_name(c.parts) for c in ast.group_by))
    if ast.order_by:
        parts.append("ORDER BY")
        rendered = []
        for term in ast.order_by:
            text = _expr(term.expr)
            if term.descending:
                text += " DESC"
            rendered.append(text)
        parts.append(", ".join(rendered))
    if ast.limit is not None:
        parts.append(f"LIMIT {ast.limit}")
    return " ".join(parts)

"""Analytic-SQL subset: lexer, parser, binder, and evaluator.

Every stage returns either a result or a positioned :class:`QueryError`
whose formatted text is what the correction loop feeds back to the model.
"""

from cohortql.sqlengine.binder import QueryPlan, bind_query
from cohortql.sqlengine.errors import (
    ErrorGroup,
    ErrorKind,
    QueryError,
    classify_error,
    format_error,
)
from cohortql.sqlengine.evaluator import (
    DEFAULT_MAX_RESULT_ROWS,
    ResultTable,
    evaluate_query,
)
from cohortql.sqlengine.parser import parse_query
from cohortql.sqlengine.printer import pretty_print

__all__ = [
    "DEFAULT_MAX_RESULT_ROWS",
    "ErrorGroup",
    "ErrorKind",
    "QueryError",
    "QueryPlan",
    "ResultTable",
    "bind_query",
    "classify_error",
    "evaluate_query",
    "format_error",
    "parse_query",
    "pretty_print",
]

"""Canonical rendering and the parse∘print fixed point."""

from random import Random

from hypothesis import given, settings
from hypothesis import strategies as st

from cohortql.sqlengine import parse_query, pretty_print

from oracle import random_query, random_table

CANONICAL = [
    "SELECT * FROM dicom_all",
    "SELECT DISTINCT Modality FROM dicom_all",
    "SELECT COUNT(*) FROM dicom_all WHERE Modality = 'CT'",
    "SELECT Modality, COUNT(DISTINCT PatientID) AS n FROM dicom_all GROUP BY Modality",
    "SELECT * FROM dicom_all WHERE (a = 1 OR b = 2) AND NOT c = 3",
    "SELECT * FROM dicom_all WHERE SeriesDescription LIKE '%T2%'",
    "SELECT * FROM dicom_all WHERE x NOT IN ('a', 'b')",
    "SELECT * FROM dicom_all WHERE REGEXP_CONTAINS(SeriesDescription, r'T[12]')",
    "SELECT a FROM dicom_all ORDER BY a DESC LIMIT 5",
    "SELECT * FROM `bigquery-public-data.idc_current.dicom_all`",
    "SELECT * FROM dicom_all WHERE name = 'o''hara'",
]


def test_canonical_strings_round_trip_verbatim():
    for text in CANONICAL:
        assert pretty_print(parse_query(text)) == text


def test_normalizes_case_and_spacing():
    text = pretty_print(parse_query("select  a , b   from t where a='x'  limit  3"))
    assert text == "SELECT a, b FROM t WHERE a = 'x' LIMIT 3"


def test_asc_keyword_dropped():
    assert (
        pretty_print(parse_query("SELECT a FROM t ORDER BY a ASC"))
        == "SELECT a FROM t ORDER BY a"
    )


def test_implicit_alias_rendered_with_as():
    assert pretty_print(parse_query("SELECT a b FROM t")) == "SELECT a AS b FROM t"


def test_raw_string_flag_preserved():
    keep = pretty_print(parse_query("SELECT * FROM t WHERE REGEXP_CONTAINS(a, r'x')"))
    assert "r'x'" in keep
    cooked = pretty_print(parse_query("SELECT * FROM t WHERE a LIKE 'x'"))
    assert "r'" not in cooked


def test_unusual_names_get_backticks():
    text = pretty_print(parse_query("SELECT * FROM `weird-name`"))
    assert text == "SELECT * FROM `weird-name`"


def test_redundant_parens_normalize_away():
    a = parse_query("SELECT * FROM t WHERE ((a = 1)) AND (b = 2)")
    b = parse_query("SELECT * FROM t WHERE a = 1 AND b = 2")
    assert pretty_print(a) == pretty_print(b)


@settings(max_examples=200)
@given(st.integers(min_value=0, max_value=2**63 - 1))
def test_print_parse_fixed_point(seed):
    """pretty_print ∘ parse_query is idempotent over generated queries."""
    rng = Random(seed)
    _catalog, name, schema_cols, rows = random_table(rng)
    ast = random_query(rng, name, schema_cols, rows)
    once = pretty_print(ast)
    reparsed = parse_query(once)
    assert pretty_print(reparsed) == once
    # and reparsing the canonical text reproduces the same canonical AST
    assert parse_query(pretty_print(reparsed)) == reparsed

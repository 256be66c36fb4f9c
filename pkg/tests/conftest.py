import pytest
from hypothesis import HealthCheck, settings

from cohortql.catalog import Catalog, Column, ColumnType, TableSchema, load_default_catalog

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def catalog():
    return load_default_catalog()


def make_catalog(name, columns, rows, *, aliases=(), digest="test-digest"):
    """Build an in-memory catalog without touching the filesystem."""
    schema = TableSchema(table_name=name, columns=tuple(columns), aliases=tuple(aliases))
    tables = {name: (schema, tuple(tuple(r) for r in rows))}
    return Catalog(tables, digest)


@pytest.fixture
def mini_catalog():
    """Five-row table exercising every column type and a few nulls."""
    return make_catalog(
        "scans",
        [
            Column("PatientID", ColumnType.TEXT, nullable=False),
            Column("Modality", ColumnType.TEXT),
            Column("BodyPart", ColumnType.TEXT),
            Column("SeriesCount", ColumnType.INTEGER),
            Column("StudyDate", ColumnType.DATE),
        ],
        [
            ("P1", "CT", "LUNG", 3, _d("2019-01-05")),
            ("P2", "MR", "BRAIN", 1, _d("2020-06-30")),
            ("P3", "CT", None, 2, _d("2018-11-12")),
            ("P4", "MR", "BRAIN", None, _d("2021-02-14")),
            ("P5", "CT", "LUNG", 5, None),
        ],
    )


def _d(text):
    import datetime

    return datetime.date.fromisoformat(text)

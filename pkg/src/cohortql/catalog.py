"""Immutable in-memory catalog of DICOM-style imaging metadata.

A catalog is loaded once from a schema descriptor (JSON) plus a data file
(CSV with header row, or JSONL) and is never mutated afterwards, so it is
safe to share across concurrent query sessions.  Tables are addressable by
their short name or by any registered fully-qualified alias
(``project.dataset.table`` style, optionally backtick-quoted).
"""

from __future__ import annotations

import csv
import datetime
import enum
import hashlib
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Union

Cell = Union[str, int, datetime.date, None]

_IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class CatalogError(Exception):
    """Base class for catalog loading and lookup failures."""


class SchemaParseError(CatalogError):
    """The schema descriptor is malformed."""


class RowValidationError(CatalogError):
    """A data row violates the table schema."""

    def __init__(self, row_index: int, column: str, reason: str) -> None:
        super().__init__(f"row {row_index}, column {column}: {reason}")
        self.row_index = row_index
        self.column = column
        self.reason = reason


class DuplicateKeyError(CatalogError):
    """A unique column holds the same non-null value twice."""

    def __init__(self, column: str, value: str, row_index: int) -> None:
        super().__init__(
            f"duplicate value {value!r} in unique column {column} (row {row_index})"
        )
        self.column = column
        self.value = value
        self.row_index = row_index


class UnknownTableError(CatalogError):
    """A table name or alias did not resolve."""

    def __init__(self, name: str, known: Sequence[str]) -> None:
        super().__init__(f"unknown table '{name}'; known tables: {', '.join(known)}")
        self.name = name
        self.known = list(known)


class ColumnType(enum.Enum):
    TEXT = "Text"
    INTEGER = "Integer"
    DATE = "Date"


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType
    nullable: bool = True
    unique: bool = False


@dataclass(frozen=True)
class TableSchema:
    table_name: str
    columns: tuple[Column, ...]
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not _IDENTIFIER_RE.match(self.table_name):
            raise SchemaParseError(f"table name {self.table_name!r} is not an identifier")
        if not self.columns:
            raise SchemaParseError(f"table {self.table_name!r} has no columns")
        seen: set[str] = set()
        for col in self.columns:
            if not _IDENTIFIER_RE.match(col.name):
                raise SchemaParseError(f"column name {col.name!r} is not an identifier")
            lowered = col.name.lower()
            if lowered in seen:
                raise SchemaParseError(f"duplicate column name {col.name!r}")
            seen.add(lowered)

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def find_column(self, name: str) -> tuple[int, Column] | None:
        """Case-insensitive column lookup; dotted refs use the final segment."""
        target = name.split(".")[-1].lower()
        for i, col in enumerate(self.columns):
            if col.name.lower() == target:
                return i, col
        return None


class Catalog:
    """Immutable mapping of table names and aliases to schemas and rows."""

    def __init__(
        self,
        tables: dict[str, tuple[TableSchema, tuple[tuple[Cell, ...], ...]]],
        digest: str,
    ) -> None:
        self._tables = dict(tables)
        self.digest = digest
        # name -> canonical table, built once; lookups are lock-free reads
        self._index: dict[str, str] = {}
        for name, (schema, _) in self._tables.items():
            self._index[name.lower()] = name
            for alias in schema.aliases:
                self._index[alias.lower()] = name

    @property
    def table_names(self) -> list[str]:
        return list(self._tables)

    @property
    def default_table(self) -> TableSchema:
        if not self._tables:
            raise UnknownTableError("<default>", [])
        first = next(iter(self._tables))
        return self._tables[first][0]

    def is_empty(self) -> bool:
        return not self._tables

    def _resolve_key(self, name: str) -> str:
        cleaned = name.strip().strip("`").strip()
        key = self._index.get(cleaned.lower())
        if key is not None:
            return key
        # Dotted names resolve on their final segment, so unregistered
        # project/dataset prefixes still reach the table.
        final = cleaned.split(".")[-1].lower()
        key = self._index.get(final)
        if key is not None and key.lower() == final:
            return key
        known = sorted(self._index)
        raise UnknownTableError(cleaned, known)

    def canonical_name(self, name: str) -> str:
        """The registered table name behind ``name`` (alias or dotted form)."""
        return self._resolve_key(name)

    def schema(self, name: str) -> TableSchema:
        return self._tables[self._resolve_key(name)][0]

    def rows(self, name: str) -> tuple[tuple[Cell, ...], ...]:
        return self._tables[self._resolve_key(name)][1]


def resolve_table(catalog: Catalog, name: str) -> TableSchema:
    """Resolve ``name`` (short, dotted, or backticked) to its schema."""
    return catalog.schema(name)


def scan_rows(catalog: Catalog, table: str) -> Iterator[tuple[Cell, ...]]:
    """Yield all rows of ``table`` in load order."""
    return iter(catalog.rows(table))


def _parse_schema_descriptor(path: Path) -> TableSchema:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise SchemaParseError(f"cannot read schema descriptor {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaParseError("schema descriptor must be a JSON object")
    name = raw.get("name")
    if not isinstance(name, str):
        raise SchemaParseError("schema descriptor is missing a 'name' string")
    aliases = raw.get("aliases", [])
    if not isinstance(aliases, list) or not all(isinstance(a, str) for a in aliases):
        raise SchemaParseError("'aliases' must be a list of strings")
    raw_columns = raw.get("columns")
    if not isinstance(raw_columns, list) or not raw_columns:
        raise SchemaParseError("'columns' must be a non-empty list")
    columns = []
    for entry in raw_columns:
        if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
            raise SchemaParseError(f"malformed column entry: {entry!r}")
        type_name = entry.get("type")
        try:
            col_type = ColumnType(type_name)
        except ValueError:
            raise SchemaParseError(
                f"column {entry['name']!r} has unknown type {type_name!r}"
            ) from None
        columns.append(
            Column(
                name=entry["name"],
                type=col_type,
                nullable=bool(entry.get("nullable", True)),
                unique=bool(entry.get("unique", False)),
            )
        )
    return TableSchema(table_name=name, columns=tuple(columns), aliases=tuple(aliases))


def _convert_csv_cell(text: str, column: Column) -> Cell:
    # Empty CSV fields are nulls for every column type.
    if text == "":
        return None
    if column.type is ColumnType.TEXT:
        return text
    if column.type is ColumnType.INTEGER:
        if not re.match(r"^-?\d+$", text):
            raise ValueError(f"{text!r} is not an integer")
        return int(text)
    if not _DATE_RE.match(text):
        raise ValueError(f"{text!r} is not a valid YYYY-MM-DD date")
    return datetime.date.fromisoformat(text)


def _convert_json_cell(value: object, column: Column) -> Cell:
    if value is None:
        return None
    if column.type is ColumnType.TEXT:
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    if column.type is ColumnType.INTEGER:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected an integer, got {value!r}")
        return value
    if not isinstance(value, str) or not _DATE_RE.match(value):
        raise ValueError(f"{value!r} is not a valid YYYY-MM-DD date")
    return datetime.date.fromisoformat(value)


def _validate_row(
    cells: list[Cell], schema: TableSchema, row_index: int
) -> tuple[Cell, ...]:
    for cell, column in zip(cells, schema.columns):
        if cell is None and not column.nullable:
            raise RowValidationError(row_index, column.name, "null in non-nullable column")
    return tuple(cells)


def _load_csv_rows(path: Path, schema: TableSchema) -> list[tuple[Cell, ...]]:
    rows: list[tuple[Cell, ...]] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            return rows
        expected = [c.name for c in schema.columns]
        if [h.strip() for h in header] != expected:
            raise SchemaParseError(
                f"CSV header {header!r} does not match schema columns {expected!r}"
            )
        for row_index, record in enumerate(reader):
            if len(record) != len(schema.columns):
                raise RowValidationError(
                    row_index, "<row>", f"expected {len(schema.columns)} cells, got {len(record)}"
                )
            cells: list[Cell] = []
            for text, column in zip(record, schema.columns):
                try:
                    cells.append(_convert_csv_cell(text, column))
                except ValueError as exc:
                    raise RowValidationError(row_index, column.name, str(exc)) from None
            rows.append(_validate_row(cells, schema, row_index))
    return rows


def _load_jsonl_rows(path: Path, schema: TableSchema) -> list[tuple[Cell, ...]]:
    rows: list[tuple[Cell, ...]] = []
    known = {c.name for c in schema.columns}
    with path.open(encoding="utf-8") as handle:
        row_index = 0
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise RowValidationError(row_index, "<row>", f"invalid JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise RowValidationError(row_index, "<row>", "row must be a JSON object")
            extra = set(obj) - known
            if extra:
                raise RowValidationError(
                    row_index, sorted(extra)[0], "not a schema column"
                )
            cells: list[Cell] = []
            for column in schema.columns:
                try:
                    cells.append(_convert_json_cell(obj.get(column.name), column))
                except ValueError as exc:
                    raise RowValidationError(row_index, column.name, str(exc)) from None
            rows.append(_validate_row(cells, schema, row_index))
            row_index += 1
    return rows


def _check_unique_columns(schema: TableSchema, rows: list[tuple[Cell, ...]]) -> None:
    for idx, column in enumerate(schema.columns):
        if not column.unique:
            continue
        seen: dict[Cell, int] = {}
        for row_index, row in enumerate(rows):
            value = row[idx]
            if value is None:
                continue
            if value in seen:
                raise DuplicateKeyError(column.name, str(value), row_index)
            seen[value] = row_index


def catalog_digest(schema_file: Path | str, data_file: Path | str) -> str:
    """Content digest of the catalog source files (sha256 over both)."""
    h = hashlib.sha256()
    h.update(Path(schema_file).read_bytes())
    h.update(b"\n")
    h.update(Path(data_file).read_bytes())
    return h.hexdigest()


def load_catalog(schema_file: Path | str, data_file: Path | str) -> Catalog:
    """Load and validate a single-table catalog from disk.

    ``schema_file`` is a JSON descriptor with ``name``, ``aliases`` and
    ``columns`` entries; ``data_file`` is CSV (header row, RFC 4180
    quoting) when it ends in ``.csv``, JSONL otherwise.  Dates are
    ``YYYY-MM-DD``; empty CSV fields and JSON nulls load as nulls.
    """
    schema_path = Path(schema_file)
    data_path = Path(data_file)
    schema = _parse_schema_descriptor(schema_path)
    if data_path.suffix.lower() == ".csv":
        rows = _load_csv_rows(data_path, schema)
    else:
        rows = _load_jsonl_rows(data_path, schema)
    _check_unique_columns(schema, rows)
    digest = catalog_digest(schema_path, data_path)
    return Catalog({schema.table_name: (schema, tuple(rows))}, digest=digest)


def _render_cell(cell: Cell) -> object:
    if isinstance(cell, datetime.date):
        return cell.isoformat()
    return cell


def export_table_jsonl(catalog: Catalog, table: str) -> str:
    """Canonical JSONL serialization of one table (the round-trip format)."""
    schema = catalog.schema(table)
    names = schema.column_names()
    out = io.StringIO()
    for row in catalog.rows(table):
        obj = {name: _render_cell(cell) for name, cell in zip(names, row)}
        out.write(json.dumps(obj, ensure_ascii=False))
        out.write("\n")
    return out.getvalue()


FIXTURES_DIR = Path(__file__).parent / "fixtures"


def load_default_catalog() -> Catalog:
    """Load the catalog fixture shipped with the package."""
    return load_catalog(
        FIXTURES_DIR / "dicom_all.schema.json", FIXTURES_DIR / "dicom_all.jsonl"
    )

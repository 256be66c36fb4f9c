"""Persisting successful query results as downloadable cohorts.

A cohort is a directory ``<store_dir>/<cohort_id>/`` holding exactly
``manifest.json`` and ``table.csv``.  Ids are ULID-style — millisecond
timestamp prefix plus random tail, Crockford base32 — so a plain
lexicographic listing is already in creation order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import secrets
import time
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path

from cohortql.catalog import Cell
from cohortql.pipeline import OUTCOME_SUCCESS, CorrectionTranscript
from cohortql.sqlengine import ResultTable

log = logging.getLogger(__name__)

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


class NotSuccessfulError(Exception):
    """Only successful transcripts can be materialized."""


class StorageError(Exception):
    pass


def new_cohort_id(now_ms: int | None = None) -> str:
    """26-character time-sortable unique id (48-bit ms time + 80-bit random)."""
    if now_ms is None:
        now_ms = time.time_ns() // 1_000_000
    value = (now_ms & ((1 << 48) - 1)) << 80 | secrets.randbits(80)
    chars = []
    for shift in range(125, -5, -5):
        chars.append(_CROCKFORD[(value >> shift) & 0x1F])
    return "".join(chars)


@dataclass(frozen=True)
class CohortManifest:
    cohort_id: str
    created_at: str  # ISO-8601 UTC
    user_input: str
    final_query: str
    row_count: int
    column_names: tuple[str, ...]
    column_types: tuple[str, ...]
    source_catalog: str  # catalog content digest

    def to_dict(self) -> dict:
        return {
            "cohort_id": self.cohort_id,
            "created_at": self.created_at,
            "user_input": self.user_input,
            "final_query": self.final_query,
            "row_count": self.row_count,
            "column_names": list(self.column_names),
            "column_types": list(self.column_types),
            "source_catalog": self.source_catalog,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CohortManifest":
        return cls(
            cohort_id=data["cohort_id"],
            created_at=data["created_at"],
            user_input=data["user_input"],
            final_query=data["final_query"],
            row_count=data["row_count"],
            column_names=tuple(data["column_names"]),
            column_types=tuple(data["column_types"]),
            source_catalog=data["source_catalog"],
        )


def _cell_text(cell: Cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, date):
        return cell.isoformat()
    return str(cell)


def _cell_json(cell: Cell) -> object:
    if isinstance(cell, date):
        return cell.isoformat()
    return cell


def export_table(table: ResultTable, format: str) -> bytes:
    """Serialize a result table; ``format`` is ``csv`` or ``jsonl``.

    CSV follows RFC 4180: CRLF line endings, header row, minimal
    quoting; Nulls become empty fields.  JSONL emits one object per row
    keyed by column name, with Nulls as JSON null and dates as ISO
    strings.
    """
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(table.column_names)
        for row in table.rows:
            writer.writerow([_cell_text(c) for c in row])
        return buf.getvalue().encode("utf-8")
    if format == "jsonl":
        lines = []
        for row in table.rows:
            record = {
                name: _cell_json(cell)
                for name, cell in zip(table.column_names, row)
            }
            lines.append(json.dumps(record, ensure_ascii=False))
        return ("".join(line + "\n" for line in lines)).encode("utf-8")
    raise ValueError(f"unknown export format {format!r}")


def materialize_cohort(
    transcript: CorrectionTranscript,
    store_dir: Path | str,
    *,
    catalog_digest: str,
) -> CohortManifest:
    """Write ``manifest.json`` and ``table.csv`` for a successful run."""
    if transcript.outcome != OUTCOME_SUCCESS or transcript.final_result is None:
        raise NotSuccessfulError(
            f"cannot materialize a transcript with outcome {transcript.outcome}"
        )
    table = transcript.final_result
    final_query = transcript.final_query
    assert final_query is not None

    cohort_id = new_cohort_id()
    manifest = CohortManifest(
        cohort_id=cohort_id,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        user_input=transcript.user_input,
        final_query=final_query,
        row_count=len(table.rows),
        column_names=tuple(table.column_names),
        column_types=tuple(t.value for t in table.column_types),
        source_catalog=catalog_digest,
    )

    target = Path(store_dir) / cohort_id
    try:
        target.mkdir(parents=True, exist_ok=False)
    except FileExistsError:
        raise StorageError(f"cohort directory already exists: {target}") from None
    except OSError as exc:
        raise StorageError(f"cannot create {target}: {exc}") from None
    try:
        (target / "table.csv").write_bytes(export_table(table, "csv"))
        (target / "manifest.json").write_text(
            json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise StorageError(f"cannot write cohort files: {exc}") from None
    log.info("materialized cohort %s (%d rows)", cohort_id, manifest.row_count)
    return manifest


def load_manifest(store_dir: Path | str, cohort_id: str) -> CohortManifest | None:
    path = Path(store_dir) / cohort_id / "manifest.json"
    if not path.is_file():
        return None
    return CohortManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))


def load_cohort_table(store_dir: Path | str, cohort_id: str) -> ResultTable | None:
    """Rebuild the typed result table from the stored CSV + manifest."""
    from cohortql.catalog import ColumnType

    manifest = load_manifest(store_dir, cohort_id)
    if manifest is None:
        return None
    path = Path(store_dir) / cohort_id / "table.csv"
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        body = [row for row in reader]
    if header is None or tuple(header) != manifest.column_names:
        raise StorageError(f"table.csv header mismatch for cohort {cohort_id}")
    types = tuple(ColumnType(t) for t in manifest.column_types)
    rows = []
    for raw in body:
        cells: list[Cell] = []
        for text_cell, ctype in zip(raw, types):
            if text_cell == "":
                cells.append(None)
            elif ctype is ColumnType.INTEGER:
                cells.append(int(text_cell))
            elif ctype is ColumnType.DATE:
                cells.append(date.fromisoformat(text_cell))
            else:
                cells.append(text_cell)
        rows.append(tuple(cells))
    return ResultTable(
        column_names=manifest.column_names, column_types=types, rows=tuple(rows)
    )


def list_cohorts(store_dir: Path | str) -> list[str]:
    """Cohort ids under ``store_dir``, oldest first (ids are time-sortable)."""
    root = Path(store_dir)
    if not root.is_dir():
        return []
    return sorted(
        p.name for p in root.iterdir() if (p / "manifest.json").is_file()
    )

"""HTTP facade over the pipeline, for the web console and scripts.

Sessions are in-memory and expire after an idle TTL; each one owns a
single conversation so follow-up questions keep their context.  Query
failures are ordinary transcript content (HTTP 200): only provider
outages surface as 503.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from cohortql.catalog import Catalog
from cohortql.cohorts import (
    export_table,
    load_cohort_table,
    materialize_cohort,
)
from cohortql.llm import Conversation, Provider
from cohortql.pipeline import (
    OUTCOME_PROVIDER_FAILURE,
    OUTCOME_SUCCESS,
    PipelineConfig,
    run_pipeline,
    transcript_to_dict,
)

log = logging.getLogger(__name__)

MAX_INPUT_CHARS = 4000
DEFAULT_SESSION_TTL_S = 1800.0


class QueryRequest(BaseModel):
    input: str
    session_id: str | None = None


@dataclass
class _Session:
    session_id: str
    conversation: Conversation
    created_at: float
    last_seen: float
    lock: threading.Lock = dc_field(default_factory=threading.Lock)


class SessionStore:
    """Thread-safe session map with idle expiry."""

    def __init__(self, ttl_s: float = DEFAULT_SESSION_TTL_S) -> None:
        self.ttl_s = ttl_s
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def _sweep(self, now: float) -> None:
        expired = [
            sid
            for sid, sess in self._sessions.items()
            if now - sess.last_seen > self.ttl_s
        ]
        for sid in expired:
            log.debug("expiring idle session %s", sid)
            del self._sessions[sid]

    def acquire(self, session_id: str | None) -> _Session:
        """Fetch or create; an expired or unknown id gets a fresh session
        under the same id so clients can keep a stored id across restarts."""
        now = time.monotonic()
        with self._lock:
            self._sweep(now)
            if session_id is None:
                session_id = uuid.uuid4().hex
            sess = self._sessions.get(session_id)
            if sess is None:
                sess = _Session(
                    session_id=session_id,
                    conversation=Conversation(),
                    created_at=now,
                    last_seen=now,
                )
                self._sessions[session_id] = sess
            else:
                sess.last_seen = now
            return sess

    def count(self) -> int:
        with self._lock:
            return len(self._sessions)


def create_app(
    catalog: Catalog,
    provider: Provider,
    config: PipelineConfig = PipelineConfig(),
    *,
    store_dir: Path | str = "cohorts",
    session_ttl_s: float = DEFAULT_SESSION_TTL_S,
    ui_dir: Path | str | None = None,
) -> FastAPI:
    app = FastAPI(title="cohortql", docs_url=None, redoc_url=None)
    sessions = SessionStore(ttl_s=session_ttl_s)
    store = Path(store_dir)

    @app.get("/api/health")
    def health() -> JSONResponse:
        if catalog.is_empty():
            return JSONResponse(
                status_code=503,
                content={"status": "no catalog loaded"},
            )
        return JSONResponse(
            {
                "status": "ok",
                "catalog_digest": catalog.digest,
                "provider_kind": provider.kind,
            }
        )

    @app.get("/api/schema")
    def schema() -> JSONResponse:
        if catalog.is_empty():
            return JSONResponse(
                status_code=404, content={"detail": "no catalog loaded"}
            )
        table = catalog.default_table
        return JSONResponse(
            {
                "table_name": table.table_name,
                "aliases": list(table.aliases),
                "columns": [
                    {"name": c.name, "type": c.type.value} for c in table.columns
                ],
            }
        )

    @app.post("/api/query")
    def query(request: QueryRequest) -> JSONResponse:
        text = request.input.strip()
        if not text:
            return JSONResponse(
                status_code=400, content={"detail": "input must be non-empty"}
            )
        if len(request.input) > MAX_INPUT_CHARS:
            return JSONResponse(
                status_code=400,
                content={
                    "detail": f"input exceeds {MAX_INPUT_CHARS} characters"
                },
            )
        session = sessions.acquire(request.session_id)
        with session.lock:
            transcript = run_pipeline(
                text,
                catalog,
                provider,
                config,
                conversation=session.conversation,
            )
        if transcript.outcome == OUTCOME_PROVIDER_FAILURE:
            return JSONResponse(
                status_code=503,
                content={
                    "detail": transcript.failure_detail or "provider failure",
                    "session_id": session.session_id,
                    "transcript": transcript_to_dict(transcript),
                },
            )
        cohort_id = None
        if (
            transcript.outcome == OUTCOME_SUCCESS
            and transcript.final_result is not None
            and len(transcript.final_result.rows) > 0
        ):
            manifest = materialize_cohort(
                transcript, store, catalog_digest=catalog.digest
            )
            cohort_id = manifest.cohort_id
        return JSONResponse(
            {
                "session_id": session.session_id,
                "transcript": transcript_to_dict(transcript),
                "cohort_id": cohort_id,
            }
        )

    @app.get("/api/cohort/{cohort_id}/export")
    def export(cohort_id: str, format: str = "csv") -> Response:
        if format not in ("csv", "jsonl"):
            return JSONResponse(
                status_code=400,
                content={"detail": f"unknown format '{format}'"},
            )
        table = load_cohort_table(store, cohort_id)
        if table is None:
            return JSONResponse(
                status_code=404,
                content={"detail": f"unknown cohort '{cohort_id}'"},
            )
        payload = export_table(table, format)
        media = "text/csv" if format == "csv" else "application/x-ndjson"
        return Response(
            content=payload,
            media_type=media,
            headers={
                "Content-Disposition": (
                    f'attachment; filename="cohort-{cohort_id}.{format}"'
                )
            },
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app

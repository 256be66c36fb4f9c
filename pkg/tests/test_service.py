"""API surface: health, schema, query flow, cohort export, sessions."""

import time

import pytest
from fastapi.testclient import TestClient

from cohortql.catalog import Catalog
from cohortql.cohorts import export_table, load_cohort_table
from cohortql.llm import ScriptedProvider
from cohortql.pipeline import PipelineConfig
from cohortql.service import MAX_INPUT_CHARS, create_app

LIDC = (
    "```sql\n"
    "SELECT PatientID, StudyDate FROM dicom_all WHERE collection_id = 'lidc_idri'\n"
    "```"
)
COUNT = "```sql\nSELECT COUNT(*) FROM dicom_all\n```"
EMPTY = "```sql\nSELECT PatientID FROM dicom_all WHERE PatientID = 'NOPE'\n```"
BROKEN = "```sql\nSELECT FROM WHERE\n```"


class RecordingProvider(ScriptedProvider):
    def __init__(self, script):
        super().__init__(script)
        self.seen = []

    def complete(self, messages):
        self.seen.append(list(messages))
        return super().complete(messages)


def make_client(tmp_path, script, **kwargs):
    from cohortql.catalog import load_default_catalog

    catalog = load_default_catalog()
    provider = RecordingProvider(script)
    app = create_app(
        catalog,
        provider,
        PipelineConfig(),
        store_dir=tmp_path / "cohorts",
        **kwargs,
    )
    return TestClient(app), provider, catalog


# --- health and schema -----------------------------------------------------

def test_health_ok(tmp_path):
    client, _, catalog = make_client(tmp_path, [COUNT])
    body = client.get("/api/health").json()
    assert body["status"] == "ok"
    assert body["catalog_digest"] == catalog.digest
    assert body["provider_kind"] == "scripted"


def test_health_without_catalog(tmp_path):
    app = create_app(
        Catalog({}, digest="empty"),
        ScriptedProvider([COUNT]),
        store_dir=tmp_path,
    )
    response = TestClient(app).get("/api/health")
    assert response.status_code == 503
    assert response.json()["status"] == "no catalog loaded"


def test_schema_endpoint(tmp_path):
    client, _, _ = make_client(tmp_path, [COUNT])
    body = client.get("/api/schema").json()
    assert body["table_name"] == "dicom_all"
    assert len(body["columns"]) == 13
    assert body["columns"][0] == {"name": "collection_id", "type": "Text"}
    assert "bigquery-public-data.idc_current.dicom_all" in body["aliases"]


def test_schema_without_catalog(tmp_path):
    app = create_app(
        Catalog({}, digest="empty"),
        ScriptedProvider([COUNT]),
        store_dir=tmp_path,
    )
    assert TestClient(app).get("/api/schema").status_code == 404


# --- query flow ------------------------------------------------------------

def test_query_success_creates_cohort(tmp_path):
    client, _, _ = make_client(tmp_path, [LIDC])
    body = client.post("/api/query", json={"input": "lidc patients"}).json()
    assert body["transcript"]["outcome"] == "Success"
    assert body["transcript"]["attempts"][0]["result"]["rows"] == [
        ["LIDC-0001", "2012-07-14"],
        ["LIDC-0002", None],
    ]
    assert body["session_id"]
    cohort_id = body["cohort_id"]
    assert cohort_id is not None
    table = load_cohort_table(tmp_path / "cohorts", cohort_id)
    assert table.row_count == 2


def test_query_empty_result_skips_cohort(tmp_path):
    client, _, _ = make_client(tmp_path, [EMPTY])
    body = client.post("/api/query", json={"input": "nobody"}).json()
    assert body["transcript"]["outcome"] == "Success"
    assert body["cohort_id"] is None


def test_query_exhaustion_is_a_normal_response(tmp_path):
    client, _, _ = make_client(tmp_path, [BROKEN] * 10)
    response = client.post("/api/query", json={"input": "x"})
    assert response.status_code == 200
    body = response.json()
    assert body["transcript"]["outcome"] == "ExhaustedAttempts"
    assert len(body["transcript"]["attempts"]) == 10
    assert body["cohort_id"] is None


def test_query_blank_input(tmp_path):
    client, _, _ = make_client(tmp_path, [COUNT])
    response = client.post("/api/query", json={"input": "   "})
    assert response.status_code == 400
    assert "non-empty" in response.json()["detail"]


def test_query_input_too_long(tmp_path):
    client, _, _ = make_client(tmp_path, [COUNT])
    response = client.post("/api/query", json={"input": "x" * (MAX_INPUT_CHARS + 1)})
    assert response.status_code == 400
    assert str(MAX_INPUT_CHARS) in response.json()["detail"]


def test_query_missing_body_field(tmp_path):
    client, _, _ = make_client(tmp_path, [COUNT])
    assert client.post("/api/query", json={}).status_code == 422


def test_provider_outage_is_503(tmp_path):
    client, _, _ = make_client(tmp_path, [COUNT])
    assert client.post("/api/query", json={"input": "a"}).status_code == 200
    # script is now exhausted; the next call is a provider failure
    response = client.post("/api/query", json={"input": "b"})
    assert response.status_code == 503
    body = response.json()
    assert "script exhausted" in body["detail"]
    assert body["transcript"]["outcome"] == "ProviderFailure"
    assert body["session_id"]


# --- export ----------------------------------------------------------------

@pytest.fixture
def cohort(tmp_path):
    client, _, _ = make_client(tmp_path, [LIDC])
    body = client.post("/api/query", json={"input": "lidc"}).json()
    return client, tmp_path / "cohorts", body["cohort_id"]


def test_export_csv(cohort):
    client, store, cohort_id = cohort
    response = client.get(f"/api/cohort/{cohort_id}/export")
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("text/csv")
    assert (
        response.headers["content-disposition"]
        == f'attachment; filename="cohort-{cohort_id}.csv"'
    )
    table = load_cohort_table(store, cohort_id)
    assert response.content == export_table(table, "csv")


def test_export_jsonl(cohort):
    client, store, cohort_id = cohort
    response = client.get(f"/api/cohort/{cohort_id}/export?format=jsonl")
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("application/x-ndjson")
    table = load_cohort_table(store, cohort_id)
    assert response.content == export_table(table, "jsonl")


def test_export_unknown_cohort(cohort):
    client, _, _ = cohort
    response = client.get("/api/cohort/0000000000000000000000NOPE/export")
    assert response.status_code == 404


def test_export_unknown_format(cohort):
    client, _, cohort_id = cohort
    response = client.get(f"/api/cohort/{cohort_id}/export?format=xlsx")
    assert response.status_code == 400
    assert "xlsx" in response.json()["detail"]


# --- sessions --------------------------------------------------------------

def test_same_session_keeps_context(tmp_path):
    client, provider, _ = make_client(tmp_path, [COUNT, COUNT])
    first = client.post("/api/query", json={"input": "a"}).json()
    sid = first["session_id"]
    second = client.post("/api/query", json={"input": "b", "session_id": sid}).json()
    assert second["session_id"] == sid
    # first call: system + user; second: prior exchange retained
    assert [len(m) for m in provider.seen] == [2, 4]


def test_distinct_sessions_are_isolated(tmp_path):
    client, provider, _ = make_client(tmp_path, [COUNT, COUNT])
    client.post("/api/query", json={"input": "a"})
    client.post("/api/query", json={"input": "b"})  # no session_id -> new session
    assert [len(m) for m in provider.seen] == [2, 2]


def test_client_supplied_session_id_is_kept(tmp_path):
    client, _, _ = make_client(tmp_path, [COUNT])
    body = client.post(
        "/api/query", json={"input": "a", "session_id": "my-console-tab"}
    ).json()
    assert body["session_id"] == "my-console-tab"


def test_idle_sessions_expire(tmp_path):
    client, provider, _ = make_client(tmp_path, [COUNT, COUNT], session_ttl_s=0.0)
    first = client.post("/api/query", json={"input": "a"}).json()
    time.sleep(0.02)
    client.post("/api/query", json={"input": "b", "session_id": first["session_id"]})
    # the second request found the session expired and started clean
    assert [len(m) for m in provider.seen] == [2, 2]


# --- static console mount --------------------------------------------------

def test_ui_absent_without_build(tmp_path):
    client, _, _ = make_client(tmp_path, [COUNT])
    assert client.get("/ui/").status_code == 404


def test_ui_served_when_built(tmp_path):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<h1>console</h1>", encoding="utf-8")
    client, _, _ = make_client(tmp_path, [COUNT], ui_dir=ui)
    response = client.get("/ui/")
    assert response.status_code == 200
    assert "console" in response.text

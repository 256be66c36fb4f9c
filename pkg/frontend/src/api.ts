/**
 * Typed client for the cohortql HTTP API.
 *
 * Every URL the console ever requests is built inside this module, so the
 * contract test can verify that the app never strays off the documented
 * surface.  The fetch implementation is injectable for testing.
 */

export type ColumnType = "Text" | "Integer" | "Date";

export type Cell = string | number | null;

export interface ResultTable {
  column_names: string[];
  column_types: ColumnType[];
  rows: Cell[][];
}

export interface AttemptError {
  kind: string;
  group: string;
  message: string;
  formatted: string;
  position: [number, number] | null;
  token: string | null;
  hint: string | null;
}

export interface Attempt {
  index: number;
  raw_response: string;
  extracted_query: string | null;
  error: AttemptError | null;
  result: ResultTable | null;
  elapsed_s: number;
}

export type Outcome = "Success" | "ExhaustedAttempts" | "ProviderFailure";

export interface Transcript {
  user_input: string;
  outcome: Outcome;
  failure_detail: string | null;
  attempts: Attempt[];
  final_result: ResultTable | null;
}

export interface QueryResponse {
  session_id: string;
  transcript: Transcript;
  cohort_id: string | null;
}

export interface SchemaColumn {
  name: string;
  type: ColumnType;
}

export interface SchemaInfo {
  table_name: string;
  aliases: string[];
  columns: SchemaColumn[];
}

export interface HealthInfo {
  status: string;
  catalog_digest?: string;
  provider_kind?: string;
  detail?: string;
}

export type ExportFormat = "csv" | "jsonl";

/** Error carrying the HTTP status and whatever JSON body the server sent. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
    public readonly body: unknown = null,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function readJson(response: Response): Promise<unknown> {
  try {
    return await response.json();
  } catch {
    return null;
  }
}

function detailOf(body: unknown, fallback: string): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return detail;
  }
  return fallback;
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly base: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  healthUrl(): string {
    return `${this.base}/api/health`;
  }

  schemaUrl(): string {
    return `${this.base}/api/schema`;
  }

  queryUrl(): string {
    return `${this.base}/api/query`;
  }

  exportUrl(cohortId: string, format: ExportFormat = "csv"): string {
    return `${this.base}/api/cohort/${encodeURIComponent(cohortId)}/export?format=${format}`;
  }

  /** GET /api/health — 503 is a valid answer (empty catalog), not a throw. */
  async health(): Promise<HealthInfo> {
    const response = await this.fetchFn(this.healthUrl());
    const body = await readJson(response);
    if (response.status === 200 || response.status === 503) {
      return body as HealthInfo;
    }
    throw new ApiError(response.status, detailOf(body, "health check failed"), body);
  }

  /** GET /api/schema */
  async schema(): Promise<SchemaInfo> {
    const response = await this.fetchFn(this.schemaUrl());
    const body = await readJson(response);
    if (response.status !== 200) {
      throw new ApiError(response.status, detailOf(body, "schema unavailable"), body);
    }
    return body as SchemaInfo;
  }

  /**
   * POST /api/query.  Resolves with the full response on 200 — including
   * ExhaustedAttempts, which is a result, not an error.  Rejects with
   * ApiError on 4xx/503; the 503 body (partial transcript and all) rides
   * along on `body`.
   */
  async query(input: string, sessionId: string | null): Promise<QueryResponse> {
    const payload: { input: string; session_id?: string } = { input };
    if (sessionId !== null) payload.session_id = sessionId;
    const response = await this.fetchFn(this.queryUrl(), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body = await readJson(response);
    if (response.status !== 200) {
      throw new ApiError(response.status, detailOf(body, "query failed"), body);
    }
    return body as QueryResponse;
  }

  /** GET /api/cohort/{id}/export — resolves to the raw payload bytes. */
  async downloadCohort(cohortId: string, format: ExportFormat = "csv"): Promise<Uint8Array<ArrayBuffer>> {
    const response = await this.fetchFn(this.exportUrl(cohortId, format));
    if (response.status !== 200) {
      const body = await readJson(response);
      throw new ApiError(response.status, detailOf(body, "export failed"), body);
    }
    return new Uint8Array(await response.arrayBuffer());
  }
}

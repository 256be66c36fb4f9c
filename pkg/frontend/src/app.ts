/**
 * Console behaviour: wires the static shell in index.html to the API client
 * and the pure renderers.
 *
 * State rules the UI enforces:
 *   - at most one query in flight; the send button is disabled while waiting
 *   - empty (or whitespace-only) input also disables send
 *   - the session id survives reloads via browser storage
 *   - a 503 raises the provider-down banner; a dropped connection gets an
 *     inline retry bubble; a failed export gets a toast
 */

import { ApiClient, ApiError } from "./api.js";
import type { ExportFormat, ResultTable } from "./api.js";
import {
  renderResponseBubble,
  renderRetryBubble,
  renderSchemaPanel,
  renderTable,
  renderUserBubble,
} from "./render.js";

export const MAX_ATTEMPTS = 10;
export const SESSION_KEY = "cohortql.session";
const TOAST_MS = 4000;

interface AppState {
  sessionId: string | null;
  inFlight: boolean;
  lastInput: string;
  seq: number;
  tables: Map<string, ResultTable>;
}

export interface App {
  send(text?: string): Promise<void>;
  /** Resolves once startup fetches (health, schema) have settled. */
  ready: Promise<void>;
  /** Resolves once the most recent send() has settled. */
  whenIdle(): Promise<void>;
  /** Detach document-level listeners (used by tests). */
  dispose(): void;
  state: AppState;
}

function must<T extends HTMLElement>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function loadSession(): string | null {
  try {
    return localStorage.getItem(SESSION_KEY);
  } catch {
    return null;
  }
}

function storeSession(id: string): void {
  try {
    localStorage.setItem(SESSION_KEY, id);
  } catch {
    /* storage unavailable; the session just won't survive a reload */
  }
}

function saveBytes(doc: Document, bytes: Uint8Array<ArrayBuffer>, filename: string, mime: string): void {
  try {
    const blob = new Blob([bytes], { type: mime });
    const url = URL.createObjectURL(blob);
    const anchor = doc.createElement("a");
    anchor.href = url;
    anchor.download = filename;
    doc.body.appendChild(anchor);
    anchor.click();
    anchor.remove();
    URL.revokeObjectURL(url);
  } catch {
    /* no blob support in this environment; the bytes were still fetched */
  }
}

export function initApp(doc: Document, client: ApiClient): App {
  const input = must<HTMLTextAreaElement>(doc, "input");
  const send = must<HTMLButtonElement>(doc, "send");
  const form = must<HTMLFormElement>(doc, "ask");
  const messages = must<HTMLElement>(doc, "messages");
  const banner = must<HTMLElement>(doc, "banner");
  const toast = must<HTMLElement>(doc, "toast");
  const schemaPanel = must<HTMLElement>(doc, "schema-panel");
  const health = must<HTMLElement>(doc, "health");

  const state: AppState = {
    sessionId: loadSession(),
    inFlight: false,
    lastInput: "",
    seq: 0,
    tables: new Map(),
  };
  let currentOp: Promise<void> = Promise.resolve();
  let toastTimer: ReturnType<typeof setTimeout> | null = null;

  function updateSendDisabled(): void {
    send.disabled = state.inFlight || input.value.trim() === "";
  }

  function append(html: string): void {
    messages.insertAdjacentHTML("beforeend", html);
    messages.scrollTop = messages.scrollHeight;
  }

  function showBanner(text: string): void {
    banner.innerHTML =
      `<span class="banner-text">${text.replace(/&/g, "&amp;").replace(/</g, "&lt;")}</span>` +
      `<button type="button" data-action="retry">retry</button>`;
    banner.hidden = false;
  }

  function hideBanner(): void {
    banner.hidden = true;
    banner.innerHTML = "";
  }

  function showToast(text: string): void {
    toast.textContent = text;
    toast.hidden = false;
    if (toastTimer !== null) clearTimeout(toastTimer);
    toastTimer = setTimeout(() => {
      toast.hidden = true;
    }, TOAST_MS);
  }

  async function runQuery(text: string, echo: boolean): Promise<void> {
    const trimmed = text.trim();
    if (trimmed === "" || state.inFlight) return;
    state.inFlight = true;
    state.lastInput = text;
    updateSendDisabled();
    if (echo) append(renderUserBubble(text));
    try {
      const response = await client.query(text, state.sessionId);
      state.sessionId = response.session_id;
      storeSession(response.session_id);
      hideBanner();
      state.seq += 1;
      const regionId = `table-${state.seq}`;
      const table = response.transcript.final_result;
      if (table !== null) state.tables.set(regionId, table);
      append(
        renderResponseBubble(response.transcript, MAX_ATTEMPTS, regionId, response.cohort_id, (format) =>
          client.exportUrl(response.cohort_id ?? "", format),
        ),
      );
    } catch (err) {
      if (err instanceof ApiError) {
        const body = err.body as { session_id?: unknown } | null;
        if (body && typeof body.session_id === "string") {
          state.sessionId = body.session_id;
          storeSession(body.session_id);
        }
        if (err.status === 503) {
          showBanner(`provider unavailable — ${err.detail}`);
        } else {
          append(renderRetryBubble(`request failed (${err.status}): ${err.detail}`));
        }
      } else {
        append(renderRetryBubble("network error — could not reach the server"));
      }
    } finally {
      state.inFlight = false;
      updateSendDisabled();
    }
  }

  function send_(text?: string): Promise<void> {
    const value = text ?? input.value;
    const echo = true;
    const op = runQuery(value, echo).then(() => {
      if (text === undefined && !state.inFlight) {
        // only clear the box when the text came from it
        input.value = "";
        updateSendDisabled();
      }
    });
    currentOp = op;
    return op;
  }

  function retry_(): Promise<void> {
    hideBanner();
    const op = runQuery(state.lastInput, false);
    currentOp = op;
    return op;
  }

  async function download(cohortId: string, format: ExportFormat): Promise<void> {
    try {
      const bytes = await client.downloadCohort(cohortId, format);
      const mime = format === "csv" ? "text/csv" : "application/x-ndjson";
      saveBytes(doc, bytes, `cohort-${cohortId}.${format}`, mime);
    } catch (err) {
      const detail = err instanceof ApiError ? err.detail : "download failed";
      showToast(`export failed: ${detail}`);
    }
  }

  function insertColumn(name: string): void {
    const start = input.selectionStart ?? input.value.length;
    const end = input.selectionEnd ?? start;
    input.value = input.value.slice(0, start) + name + input.value.slice(end);
    const cursor = start + name.length;
    try {
      input.setSelectionRange(cursor, cursor);
    } catch {
      /* selection APIs missing in some environments */
    }
    input.focus();
    updateSendDisabled();
  }

  const onSubmit = (event: Event): void => {
    event.preventDefault();
    void send_();
  };

  const onClick = (event: Event): void => {
    const target = (event.target as HTMLElement | null)?.closest?.("[data-action]");
    if (!target) return;
    const action = target.getAttribute("data-action");
    if (action === "page") {
      const regionId = target.getAttribute("data-region") ?? "";
      const page = Number(target.getAttribute("data-page") ?? "0");
      const table = state.tables.get(regionId);
      const region = doc.getElementById(regionId);
      if (table && region) region.innerHTML = renderTable(table, regionId, page);
    } else if (action === "retry") {
      void retry_();
    } else if (action === "download") {
      event.preventDefault();
      const cohortId = target.getAttribute("data-cohort") ?? "";
      const format = (target.getAttribute("data-format") ?? "csv") as ExportFormat;
      void download(cohortId, format);
    } else if (action === "insert-column") {
      insertColumn(target.getAttribute("data-col") ?? "");
    }
  };

  input.addEventListener("input", updateSendDisabled);
  form.addEventListener("submit", onSubmit);
  doc.addEventListener("click", onClick);

  const ready = (async () => {
    try {
      const info = await client.health();
      health.textContent =
        info.status === "ok"
          ? `catalog ${info.catalog_digest ?? "?"} · provider ${info.provider_kind ?? "?"}`
          : `service degraded: ${info.detail ?? info.status}`;
    } catch {
      health.textContent = "server unreachable";
    }
    try {
      schemaPanel.innerHTML = renderSchemaPanel(await client.schema());
    } catch {
      schemaPanel.innerHTML = `<h2>schema</h2><p class="schema-missing">schema unavailable</p>`;
    }
  })();

  updateSendDisabled();

  return {
    send: send_,
    ready,
    whenIdle: () => currentOp,
    dispose: () => {
      input.removeEventListener("input", updateSendDisabled);
      form.removeEventListener("submit", onSubmit);
      doc.removeEventListener("click", onClick);
      if (toastTimer !== null) clearTimeout(toastTimer);
    },
    state,
  };
}

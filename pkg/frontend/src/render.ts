/**
 * Pure HTML renderers for the console.
 *
 * Every function here maps data to a markup string with no DOM access and no
 * state, which keeps the snapshot test honest: the same transcript always
 * yields byte-identical markup.  Interactive elements carry `data-action`
 * attributes; the app wires behaviour to those via event delegation.
 */

import type { Attempt, ResultTable, SchemaInfo, Transcript } from "./api.js";

export const PAGE_SIZE = 50;

const HTML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => HTML_ESCAPES[ch]);
}

function cellHtml(value: string | number | null): string {
  if (value === null) return '<td class="cell-null">null</td>';
  return `<td>${escapeHtml(String(value))}</td>`;
}

/**
 * Render one page of a result table.  Tables longer than PAGE_SIZE rows get
 * a pager; the page buttons carry the owning region's id so the app knows
 * which table to re-render.
 */
export function renderTable(table: ResultTable, regionId: string, page: number): string {
  const total = table.rows.length;
  const pageCount = Math.max(1, Math.ceil(total / PAGE_SIZE));
  const current = Math.min(Math.max(page, 0), pageCount - 1);
  const start = current * PAGE_SIZE;
  const visible = table.rows.slice(start, start + PAGE_SIZE);

  const head = table.column_names
    .map((name, i) => `<th>${escapeHtml(name)}<span class="col-type">${escapeHtml(table.column_types[i] ?? "")}</span></th>`)
    .join("");
  const body = visible.map((row) => `<tr>${row.map(cellHtml).join("")}</tr>`).join("");

  let pager = "";
  if (total > PAGE_SIZE) {
    const first = start + 1;
    const last = start + visible.length;
    const prevDisabled = current === 0 ? " disabled" : "";
    const nextDisabled = current === pageCount - 1 ? " disabled" : "";
    pager =
      `<div class="pager">` +
      `<button type="button" data-action="page" data-region="${escapeHtml(regionId)}" data-page="${current - 1}"${prevDisabled}>&larr; prev</button>` +
      `<span class="pager-status">rows ${first}&ndash;${last} of ${total}</span>` +
      `<button type="button" data-action="page" data-region="${escapeHtml(regionId)}" data-page="${current + 1}"${nextDisabled}>next &rarr;</button>` +
      `</div>`;
  }

  return (
    `<div class="table-scroll"><table class="result-table">` +
    `<thead><tr>${head}</tr></thead><tbody>${body}</tbody>` +
    `</table></div>${pager}`
  );
}

function badgeClass(attempt: Attempt): string {
  return attempt.error === null ? "badge badge-ok" : "badge badge-err";
}

function attemptSummary(attempt: Attempt, maxAttempts: number): string {
  const badge = `<span class="${badgeClass(attempt)}">attempt ${attempt.index}/${maxAttempts}</span>`;
  const label =
    attempt.error === null
      ? `ok (${attempt.result ? attempt.result.rows.length : 0} rows)`
      : attempt.error.kind;
  return `${badge}<span class="attempt-label">${escapeHtml(label)}</span>`;
}

/**
 * One attempt as a collapsed, expandable block.  Exactly one badge per
 * attempt — the summary line — with the raw query and any error text behind
 * the fold.
 */
export function renderAttempt(attempt: Attempt, maxAttempts: number): string {
  const parts: string[] = [];
  if (attempt.extracted_query !== null) {
    parts.push(`<pre class="code">${escapeHtml(attempt.extracted_query)}</pre>`);
  } else {
    parts.push(`<pre class="code code-missing">${escapeHtml(attempt.raw_response)}</pre>`);
  }
  if (attempt.error !== null) {
    parts.push(`<pre class="error-text">${escapeHtml(attempt.error.formatted)}</pre>`);
  }
  return (
    `<details class="attempt"><summary>${attemptSummary(attempt, maxAttempts)}</summary>` +
    `<div class="attempt-body">${parts.join("")}</div></details>`
  );
}

function outcomeChip(transcript: Transcript): string {
  const cls =
    transcript.outcome === "Success"
      ? "outcome outcome-ok"
      : transcript.outcome === "ExhaustedAttempts"
        ? "outcome outcome-warn"
        : "outcome outcome-err";
  let text: string = transcript.outcome;
  if (transcript.failure_detail) text += ` — ${transcript.failure_detail}`;
  return `<div class="${cls}">${escapeHtml(text)}</div>`;
}

/**
 * A full response bubble: the attempt trail, the outcome, the final table
 * (if any) and download links (if a cohort was stored).  `regionId` names
 * the table container so pagination can re-render it in place.
 */
export function renderResponseBubble(
  transcript: Transcript,
  maxAttempts: number,
  regionId: string,
  cohortId: string | null,
  exportHref: (format: "csv" | "jsonl") => string,
): string {
  const attempts = transcript.attempts.map((a) => renderAttempt(a, maxAttempts)).join("");
  const parts = [`<div class="attempts">${attempts}</div>`, outcomeChip(transcript)];
  if (transcript.final_result !== null) {
    parts.push(
      `<div class="table-region" id="${escapeHtml(regionId)}">` +
        renderTable(transcript.final_result, regionId, 0) +
        `</div>`,
    );
  }
  if (cohortId !== null) {
    parts.push(
      `<div class="downloads">` +
        `<a data-action="download" data-cohort="${escapeHtml(cohortId)}" data-format="csv" href="${escapeHtml(exportHref("csv"))}">download CSV</a>` +
        `<a data-action="download" data-cohort="${escapeHtml(cohortId)}" data-format="jsonl" href="${escapeHtml(exportHref("jsonl"))}">download JSONL</a>` +
        `</div>`,
    );
  }
  return `<div class="bubble response">${parts.join("")}</div>`;
}

export function renderUserBubble(text: string): string {
  return `<div class="bubble user">${escapeHtml(text)}</div>`;
}

/** Inline failure bubble with a retry affordance for dropped connections. */
export function renderRetryBubble(message: string): string {
  return (
    `<div class="bubble response failed">` +
    `<span class="failed-text">${escapeHtml(message)}</span>` +
    `<button type="button" data-action="retry">retry</button>` +
    `</div>`
  );
}

/** Schema side panel; each column row is a click-to-insert target. */
export function renderSchemaPanel(schema: SchemaInfo): string {
  const aliases = schema.aliases.map((a) => `<code>${escapeHtml(a)}</code>`).join(" ");
  const columns = schema.columns
    .map(
      (col) =>
        `<li><button type="button" data-action="insert-column" data-col="${escapeHtml(col.name)}">` +
        `${escapeHtml(col.name)}</button><span class="col-type">${escapeHtml(col.type)}</span></li>`,
    )
    .join("");
  return (
    `<h2>schema</h2>` +
    `<div class="schema-table-name"><code>${escapeHtml(schema.table_name)}</code></div>` +
    (aliases ? `<div class="schema-aliases">also answers to ${aliases}</div>` : "") +
    `<ul class="schema-columns">${columns}</ul>`
  );
}

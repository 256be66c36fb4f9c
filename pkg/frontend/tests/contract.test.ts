import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { FetchLike, ResultTable, Transcript } from "../src/api.js";
import { SESSION_KEY, initApp } from "../src/app.js";
import type { App } from "../src/app.js";

const HERE = dirname(fileURLToPath(import.meta.url));

const TRANSCRIPT = JSON.parse(
  readFileSync(join(HERE, "fixtures", "transcript-two-attempts.json"), "utf-8"),
) as Transcript;
const SCHEMA = JSON.parse(readFileSync(join(HERE, "fixtures", "schema.json"), "utf-8"));
const CSV_BYTES = new Uint8Array(readFileSync(join(HERE, "fixtures", "cohort.csv")));
const JSONL_BYTES = new TextEncoder().encode(
  '{"PatientID": "GBM-0101", "SeriesDescription": "T2 FLAIR AXIAL"}\n' +
    '{"PatientID": "TCGA-LGG-0002", "SeriesDescription": "AX FLAIR"}\n',
);

const COHORT_ID = "01HZXC3F4G5H6J7K8M9N0P1Q2R";

// The console shell under test is the real page, not a replica of it.  The
// module script is dropped: the tests boot the app themselves.
const PAGE = readFileSync(join(HERE, "..", "index.html"), "utf-8");
const SHELL = PAGE.slice(PAGE.indexOf("<body>") + "<body>".length, PAGE.indexOf("</body>")).replace(
  /<script[\s\S]*?<\/script>/g,
  "",
);

function jsonResponse(status: number, payload: unknown): Response {
  return {
    status,
    async json() {
      return JSON.parse(JSON.stringify(payload));
    },
    async arrayBuffer() {
      return new TextEncoder().encode(JSON.stringify(payload)).buffer;
    },
  } as unknown as Response;
}

function bytesResponse(status: number, data: Uint8Array): Response {
  return {
    status,
    async json() {
      throw new Error("binary payload");
    },
    async arrayBuffer() {
      return data.slice().buffer;
    },
  } as unknown as Response;
}

interface MockOptions {
  queryStatus?: number;
  cohortId?: string | null;
  transcript?: Transcript;
  failQueryOnce?: boolean;
  gate?: Promise<void> | null;
}

interface Call {
  method: string;
  url: string;
  body: { input?: string; session_id?: string } | null;
}

/**
 * In-memory stand-in for `cohortql serve` that speaks exactly the documented
 * API surface.  Any request outside that surface throws, which fails the
 * test — that is the contract check.
 */
function makeServer(opts: MockOptions = {}) {
  const calls: Call[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = (init?.method ?? "GET").toUpperCase();
    const body = init?.body ? (JSON.parse(String(init.body)) as Call["body"]) : null;
    calls.push({ method, url, body });

    if (method === "GET" && url === "/api/health") {
      return jsonResponse(200, { status: "ok", catalog_digest: "0".repeat(12), provider_kind: "scripted" });
    }
    if (method === "GET" && url === "/api/schema") {
      return jsonResponse(200, SCHEMA);
    }
    if (method === "POST" && url === "/api/query") {
      const contentType = (init?.headers as Record<string, string> | undefined)?.["content-type"] ?? "";
      if (!contentType.includes("json")) throw new Error("query posted without a JSON content type");
      if (opts.failQueryOnce) {
        opts.failQueryOnce = false;
        throw new TypeError("fetch failed");
      }
      if (opts.gate) await opts.gate;
      if ((opts.queryStatus ?? 200) === 503) {
        return jsonResponse(503, {
          detail: "provider call failed: connection refused",
          session_id: "s-err",
          transcript: { ...TRANSCRIPT, outcome: "ProviderFailure", attempts: [], final_result: null },
        });
      }
      return jsonResponse(200, {
        session_id: "s-1",
        transcript: opts.transcript ?? TRANSCRIPT,
        cohort_id: opts.cohortId === undefined ? COHORT_ID : opts.cohortId,
      });
    }
    if (method === "GET" && url === `/api/cohort/${COHORT_ID}/export?format=csv`) {
      return bytesResponse(200, CSV_BYTES);
    }
    if (method === "GET" && url === `/api/cohort/${COHORT_ID}/export?format=jsonl`) {
      return bytesResponse(200, JSONL_BYTES);
    }
    if (method === "GET" && url.startsWith("/api/cohort/MISSING/export")) {
      return jsonResponse(404, { detail: "unknown cohort id 'MISSING'" });
    }
    throw new Error(`undocumented request: ${method} ${url}`);
  };
  return { fetchFn, calls, opts };
}

const tick = () => new Promise<void>((resolve) => setTimeout(resolve, 0));

function click(el: Element): void {
  el.dispatchEvent(new MouseEvent("click", { bubbles: true, cancelable: true }));
}

function typeInput(text: string): void {
  const input = document.getElementById("input") as HTMLTextAreaElement;
  input.value = text;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

let app: App | null = null;

function boot(server: ReturnType<typeof makeServer>): App {
  app = initApp(document, new ApiClient("", server.fetchFn));
  return app;
}

beforeEach(() => {
  document.body.innerHTML = SHELL;
  try {
    localStorage.clear();
  } catch {
    /* no storage in this environment */
  }
});

afterEach(() => {
  app?.dispose();
  app = null;
});

describe("documented surface", () => {
  it("startup plus a full exchange touches only documented endpoints", async () => {
    const server = makeServer();
    const a = boot(server);
    await a.ready;

    expect(document.querySelectorAll('#schema-panel [data-action="insert-column"]').length).toBe(13);
    expect(document.getElementById("health")?.textContent).toContain("scripted");

    typeInput("patients with FLAIR series");
    await a.send();

    // the mock throws on anything undocumented; additionally pin the exact trace
    expect(server.calls.map((c) => `${c.method} ${c.url}`)).toEqual([
      "GET /api/health",
      "GET /api/schema",
      "POST /api/query",
    ]);
    expect(server.calls[2].body).toEqual({ input: "patients with FLAIR series" });
  });

  it("renders one badge per attempt and the final table", async () => {
    const server = makeServer();
    const a = boot(server);
    await a.ready;
    typeInput("patients with FLAIR series");
    await a.send();

    const badges = [...document.querySelectorAll("#messages .badge")];
    expect(badges.length).toBe(TRANSCRIPT.attempts.length);
    expect(badges.map((b) => b.textContent)).toEqual(["attempt 1/10", "attempt 2/10"]);
    expect([...document.querySelectorAll("#messages details.attempt")].every((d) => !d.hasAttribute("open"))).toBe(
      true,
    );
    const cells = [...document.querySelectorAll("#messages tbody td")].map((td) => td.textContent);
    expect(cells).toEqual(["GBM-0101", "T2 FLAIR AXIAL", "TCGA-LGG-0002", "AX FLAIR"]);
  });

  it("reply DOM for the stored transcript is stable", async () => {
    const server = makeServer();
    const a = boot(server);
    await a.ready;
    typeInput("patients with FLAIR series");
    await a.send();
    expect(document.getElementById("messages")?.innerHTML).toMatchSnapshot();
  });
});

describe("cohort download", () => {
  it("fetches bytes identical to the server export payload", async () => {
    const server = makeServer();
    const client = new ApiClient("", server.fetchFn);
    const bytes = await client.downloadCohort(COHORT_ID, "csv");
    expect(Array.from(bytes)).toEqual(Array.from(CSV_BYTES));
  });

  it("routes link clicks through the export endpoint", async () => {
    const server = makeServer();
    const a = boot(server);
    await a.ready;
    typeInput("patients with FLAIR series");
    await a.send();

    const link = document.querySelector('[data-action="download"][data-format="csv"]');
    expect(link).not.toBeNull();
    click(link as Element);
    await tick();

    expect(server.calls.map((c) => `${c.method} ${c.url}`)).toContain(
      `GET /api/cohort/${COHORT_ID}/export?format=csv`,
    );
    expect(document.getElementById("toast")?.hidden).toBe(true);
  });

  it("shows a toast when the export 404s", async () => {
    const server = makeServer({ cohortId: "MISSING" });
    const a = boot(server);
    await a.ready;
    typeInput("patients with FLAIR series");
    await a.send();

    click(document.querySelector('[data-action="download"][data-format="csv"]') as Element);
    await tick();

    const toast = document.getElementById("toast");
    expect(toast?.hidden).toBe(false);
    expect(toast?.textContent).toContain("export failed");
  });
});

describe("failure handling", () => {
  it("a 503 raises the provider-down banner and retry re-asks without re-echoing", async () => {
    const server = makeServer({ queryStatus: 503 });
    const a = boot(server);
    await a.ready;
    typeInput("patients with FLAIR series");
    await a.send();

    const banner = document.getElementById("banner");
    expect(banner?.hidden).toBe(false);
    expect(banner?.textContent).toContain("provider unavailable");
    expect(localStorage.getItem(SESSION_KEY)).toBe("s-err");

    server.opts.queryStatus = 200;
    click(banner?.querySelector('[data-action="retry"]') as Element);
    await tick();
    await a.whenIdle();

    expect(document.getElementById("banner")?.hidden).toBe(true);
    expect(document.querySelectorAll("#messages .badge").length).toBe(2);
    expect(document.querySelectorAll("#messages .bubble.user").length).toBe(1);
    const retryBody = server.calls.filter((c) => c.method === "POST").at(-1)?.body;
    expect(retryBody?.session_id).toBe("s-err");
  });

  it("a dropped connection yields an inline retry affordance", async () => {
    const server = makeServer({ failQueryOnce: true });
    const a = boot(server);
    await a.ready;
    typeInput("patients with FLAIR series");
    await a.send();

    const retry = document.querySelector('#messages .bubble.failed [data-action="retry"]');
    expect(retry).not.toBeNull();
    expect(document.getElementById("banner")?.hidden).toBe(true);

    click(retry as Element);
    await tick();
    await a.whenIdle();

    expect(document.querySelectorAll("#messages .badge").length).toBe(2);
    expect(server.calls.filter((c) => c.method === "POST").length).toBe(2);
  });

  it("exhausted attempts arrive as a normal reply, not an error state", async () => {
    const exhausted: Transcript = {
      ...TRANSCRIPT,
      outcome: "ExhaustedAttempts",
      failure_detail: "no executable query after 10 attempts",
      attempts: [TRANSCRIPT.attempts[0], { ...TRANSCRIPT.attempts[0], index: 2 }, { ...TRANSCRIPT.attempts[0], index: 3 }],
      final_result: null,
    };
    const server = makeServer({ transcript: exhausted, cohortId: null });
    const a = boot(server);
    await a.ready;
    typeInput("query that never parses");
    await a.send();

    expect(document.querySelectorAll("#messages .badge").length).toBe(3);
    expect(document.querySelector("#messages .outcome-warn")?.textContent).toContain("ExhaustedAttempts");
    expect(document.getElementById("banner")?.hidden).toBe(true);
    expect(document.querySelector("#messages .bubble.failed")).toBeNull();
  });
});

describe("session and input state", () => {
  it("persists the session id and sends it on later queries and after reload", async () => {
    const server = makeServer();
    const a = boot(server);
    await a.ready;
    typeInput("patients with FLAIR series");
    await a.send();

    expect(localStorage.getItem(SESSION_KEY)).toBe("s-1");

    typeInput("how many of those are MR?");
    await a.send();
    const posts = server.calls.filter((c) => c.method === "POST");
    expect(posts.length).toBe(2);
    expect(posts[0].body?.session_id).toBeUndefined();
    expect(posts[1].body?.session_id).toBe("s-1");

    // a "reload": fresh shell and app, same browser storage
    a.dispose();
    document.body.innerHTML = SHELL;
    const server2 = makeServer();
    const a2 = boot(server2);
    await a2.ready;
    typeInput("and how many are CT?");
    await a2.send();
    expect(server2.calls.filter((c) => c.method === "POST")[0].body?.session_id).toBe("s-1");
  });

  it("keeps send disabled for empty or whitespace-only input", async () => {
    const server = makeServer();
    const a = boot(server);
    await a.ready;
    const send = document.getElementById("send") as HTMLButtonElement;

    expect(send.disabled).toBe(true);
    typeInput("   ");
    expect(send.disabled).toBe(true);
    typeInput("count the patients");
    expect(send.disabled).toBe(false);
  });

  it("allows only one query in flight and disables send while waiting", async () => {
    let release!: () => void;
    const gate = new Promise<void>((resolve) => (release = resolve));
    const server = makeServer({ gate });
    const a = boot(server);
    await a.ready;

    typeInput("patients with FLAIR series");
    const pending = a.send();
    await tick();

    const send = document.getElementById("send") as HTMLButtonElement;
    expect(send.disabled).toBe(true);
    document.getElementById("ask")?.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
    await tick();
    expect(server.calls.filter((c) => c.method === "POST").length).toBe(1);

    release();
    await pending;
    expect((document.getElementById("input") as HTMLTextAreaElement).value).toBe("");
    expect(document.querySelectorAll("#messages .bubble.user").length).toBe(1);
  });

  it("schema clicks insert the column name into the prompt", async () => {
    const server = makeServer();
    const a = boot(server);
    await a.ready;

    const button = document.querySelector('#schema-panel [data-action="insert-column"][data-col="PatientID"]');
    expect(button).not.toBeNull();
    click(button as Element);

    const input = document.getElementById("input") as HTMLTextAreaElement;
    expect(input.value).toContain("PatientID");
    expect((document.getElementById("send") as HTMLButtonElement).disabled).toBe(false);
  });
});

describe("result pagination", () => {
  it("pages long tables in place at 50 rows", async () => {
    const longTable: ResultTable = {
      column_names: ["n"],
      column_types: ["Integer"],
      rows: Array.from({ length: 120 }, (_, i) => [i + 1]),
    };
    const paged: Transcript = {
      ...TRANSCRIPT,
      attempts: [TRANSCRIPT.attempts[1]],
      final_result: longTable,
    };
    const server = makeServer({ transcript: paged, cohortId: null });
    const a = boot(server);
    await a.ready;
    typeInput("all the rows");
    await a.send();

    const region = () => document.querySelector("#messages .table-region") as HTMLElement;
    const bodyRows = () => region().querySelectorAll("tbody tr");
    const nextButton = () =>
      [...region().querySelectorAll<HTMLButtonElement>('[data-action="page"]')].find((b) =>
        b.textContent?.includes("next"),
      ) as HTMLButtonElement;

    expect(bodyRows().length).toBe(50);
    expect(region().querySelector(".pager-status")?.textContent).toBe("rows 1–50 of 120");

    click(nextButton());
    expect(bodyRows().length).toBe(50);
    expect(bodyRows()[0].textContent).toBe("51");

    click(nextButton());
    expect(bodyRows().length).toBe(20);
    expect(nextButton().disabled).toBe(true);

    const prev = [...region().querySelectorAll<HTMLButtonElement>('[data-action="page"]')].find((b) =>
      b.textContent?.includes("prev"),
    ) as HTMLButtonElement;
    click(prev);
    expect(bodyRows()[0].textContent).toBe("51");
  });
});

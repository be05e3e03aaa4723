import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";
import { AddressInfo } from "node:net";

export interface MockCase {
  sample_id: string;
  rank: number;
  predicted_label: number;
  confidence: number;
  true_label: number;
  grid: { rows: number; cols: number };
  status: "pending" | "resolved" | "skipped";
}

export interface SubmissionRecord {
  sample_id: string;
  url: string;
  body: string;
}

/**
 * In-process stand-in for the feedback service with the same routes and
 * error envelopes: first submission wins (409 after), bad or empty cells
 * are rejected with 422 and leave the case pending.
 */
export class MockService {
  cases: MockCase[] = [];
  submissions: SubmissionRecord[] = [];
  /** When true, session requests are dropped mid-flight. */
  failSession = false;
  /** When > 0, that many resolution posts are dropped mid-flight. */
  failSubmits = 0;
  /** When > 0, that many selection posts are rejected with 422. */
  reject422 = 0;
  private server: Server | null = null;
  baseUrl = "";

  constructor(cases: MockCase[]) {
    this.cases = cases;
  }

  async start(): Promise<void> {
    this.server = createServer((req, res) => this.route(req, res));
    await new Promise<void>((resolve) =>
      this.server!.listen(0, "127.0.0.1", resolve));
    const port = (this.server!.address() as AddressInfo).port;
    this.baseUrl = `http://127.0.0.1:${port}`;
  }

  async stop(): Promise<void> {
    if (!this.server) return;
    await new Promise<void>((resolve, reject) =>
      this.server!.close((err) => (err ? reject(err) : resolve())));
    this.server = null;
  }

  pending(): MockCase[] {
    return this.cases.filter((c) => c.status === "pending");
  }

  private json(res: ServerResponse, status: number, body: unknown): void {
    res.writeHead(status, { "content-type": "application/json" });
    res.end(JSON.stringify(body));
  }

  private route(req: IncomingMessage, res: ServerResponse): void {
    const chunks: Buffer[] = [];
    req.on("data", (c: Buffer) => chunks.push(c));
    req.on("end", () => {
      const body = Buffer.concat(chunks).toString("utf8");
      this.dispatch(req, res, body);
    });
  }

  private dispatch(
    req: IncomingMessage, res: ServerResponse, body: string,
  ): void {
    const url = req.url ?? "";
    if (url === "/session") {
      if (this.failSession) {
        res.destroy();
        return;
      }
      const pending = this.pending().map((c) => c.sample_id);
      this.json(res, 200, {
        session_id: "mock-epoch1",
        epoch: 1,
        total_cases: this.cases.length,
        resolved_count: this.cases.length - pending.length,
        pending_case_ids: pending,
      });
      return;
    }
    const m = url.match(/^\/cases\/([^/]+)(\/(image|heatmap|selection|skip))?$/);
    if (!m) {
      this.json(res, 404, { code: "not_found", message: `no route ${url}` });
      return;
    }
    const id = decodeURIComponent(m[1]);
    const sub = m[3];
    const found = this.cases.find((c) => c.sample_id === id);
    if (!found) {
      this.json(res, 404,
        { code: "not_found", message: `no case for sample '${id}'` });
      return;
    }
    if (sub === "image" || sub === "heatmap") {
      res.writeHead(200, { "content-type": "image/png" });
      res.end(Buffer.from([0x89, 0x50, 0x4e, 0x47]));
      return;
    }
    if (sub === "selection" || sub === "skip") {
      if (this.failSubmits > 0) {
        this.failSubmits--;
        res.destroy();
        return;
      }
      this.submissions.push({ sample_id: id, url, body });
      if (sub === "selection" && this.reject422 > 0) {
        this.reject422--;
        this.json(res, 422, { code: "bad_cell",
          message: "cell indices [99] out of range [0, 16)" });
        return;
      }
      if (sub === "selection") {
        let cells: unknown;
        try {
          cells = JSON.parse(body).cells;
        } catch {
          cells = undefined;
        }
        if (!Array.isArray(cells)) {
          this.json(res, 422, { detail: [{ loc: ["body", "cells"],
            msg: "Field required" }] });
          return;
        }
        if (cells.length === 0) {
          this.json(res, 422, { code: "empty_selection",
            message: "at least one cell must be selected" });
          return;
        }
        const limit = found.grid.rows * found.grid.cols;
        const bad = cells.filter((c) => !(Number.isInteger(c) && c >= 0 && c < limit));
        if (bad.length > 0) {
          this.json(res, 422, { code: "bad_cell",
            message: `cell indices ${JSON.stringify(bad)} out of range [0, ${limit})` });
          return;
        }
        if (found.status !== "pending") {
          this.json(res, 409, { code: "already_resolved",
            message: `case '${id}' already resolved` });
          return;
        }
        found.status = "resolved";
        this.json(res, 200, { sample_id: id, action: "selection",
          cells: [...new Set(cells as number[])].sort((a, b) => a - b) });
      } else {
        if (found.status !== "pending") {
          this.json(res, 409, { code: "already_resolved",
            message: `case '${id}' already resolved` });
          return;
        }
        found.status = "skipped";
        this.json(res, 200, { sample_id: id, action: "skip", cells: null });
      }
      return;
    }
    // case detail
    this.json(res, 200, {
      ...found,
      image_url: `/cases/${id}/image`,
      heatmap_url: `/cases/${id}/heatmap`,
    });
  }
}

export function makeCases(n: number, grid = 4): MockCase[] {
  const cases: MockCase[] = [];
  for (let i = 1; i <= n; i++) {
    cases.push({
      sample_id: `train-0-${String(i).padStart(4, "0")}`,
      rank: i,
      predicted_label: 1,
      confidence: 0.9 - i * 0.05,
      true_label: 0,
      grid: { rows: grid, cols: grid },
      status: "pending",
    });
  }
  return cases;
}

/** Poll until the predicate holds; fail loudly on timeout. */
export async function waitFor(
  predicate: () => boolean, what: string, timeoutMs = 5000,
): Promise<void> {
  const start = Date.now();
  while (!predicate()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((r) => setTimeout(r, 10));
  }
}

/** Give the image its natural size and fire the load event. */
export function primeImage(root: ParentNode, w: number, h: number): void {
  const img = root.querySelector<HTMLImageElement>("img.case-image");
  if (!img) throw new Error("no case image in the DOM");
  Object.defineProperty(img, "naturalWidth", { value: w, configurable: true });
  Object.defineProperty(img, "naturalHeight", { value: h, configurable: true });
  img.dispatchEvent(new Event("load"));
}

/** Pin the overlay's layout box, which jsdom never computes on its own. */
export function stubRect(node: HTMLElement, width: number, height: number): void {
  node.getBoundingClientRect = () =>
    ({
      x: 0, y: 0, left: 0, top: 0, width, height,
      right: width, bottom: height,
      toJSON: () => ({}),
    }) as DOMRect;
}

export function clickAt(node: HTMLElement, x: number, y: number): void {
  node.dispatchEvent(new MouseEvent("click",
    { clientX: x, clientY: y, bubbles: true }));
}

/** Typed client for the feedback service HTTP API. */

export interface GridShape {
  rows: number;
  cols: number;
}

export interface SessionView {
  session_id: string;
  epoch: number;
  total_cases: number;
  resolved_count: number;
  pending_case_ids: string[];
}

export type CaseStatus = "pending" | "resolved" | "skipped";

export interface CaseView {
  sample_id: string;
  rank: number;
  predicted_label: number;
  confidence: number;
  true_label: number;
  grid: GridShape;
  status: CaseStatus;
  image_url: string;
  heatmap_url: string;
}

export interface ResolutionAck {
  sample_id: string;
  action: "selection" | "skip";
  cells: number[] | null;
}

/** Error body shape the service uses for domain errors. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Sorted ascending, duplicates dropped. */
export function canonicalCells(cells: Iterable<number>): number[] {
  return [...new Set(cells)].sort((a, b) => a - b);
}

/**
 * Exact JSON body for a selection POST: no whitespace, cells sorted
 * ascending. Byte-for-byte what a recorded session would replay.
 */
export function selectionBody(cells: Iterable<number>): string {
  return `{"cells":[${canonicalCells(cells).join(",")}]}`;
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let code = "http_error";
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
    } else if (body.detail !== undefined) {
      // request-schema violations come back in a different envelope
      code = "invalid_request";
      message = JSON.stringify(body.detail);
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, code, message);
}

export class FeedbackApi {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  session(): Promise<SessionView> {
    return this.getJson<SessionView>("/session");
  }

  caseDetail(sampleId: string): Promise<CaseView> {
    return this.getJson<CaseView>(`/cases/${encodeURIComponent(sampleId)}`);
  }

  imageUrl(c: CaseView): string {
    return this.baseUrl + c.image_url;
  }

  heatmapUrl(c: CaseView): string {
    return this.baseUrl + c.heatmap_url;
  }

  async submitSelection(
    sampleId: string, cells: Iterable<number>,
  ): Promise<ResolutionAck> {
    const res = await fetch(
      `${this.baseUrl}/cases/${encodeURIComponent(sampleId)}/selection`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: selectionBody(cells),
      },
    );
    await raiseForStatus(res);
    return (await res.json()) as ResolutionAck;
  }

  async skip(sampleId: string): Promise<ResolutionAck> {
    const res = await fetch(
      `${this.baseUrl}/cases/${encodeURIComponent(sampleId)}/skip`,
      { method: "POST" },
    );
    await raiseForStatus(res);
    return (await res.json()) as ResolutionAck;
  }
}

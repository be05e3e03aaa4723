/**
 * Single-page review flow for a feedback session.
 *
 * A queue of misprediction cases is shown in rank order; the focused case
 * renders the training image under a clickable grid overlay with a togglable
 * heatmap. Selections are submitted to the service, which is the source of
 * truth; the page advances to the next pending case after each resolution
 * and ends on a completion summary.
 */

import { ApiError, CaseView, FeedbackApi, SessionView } from "./api.js";
import { GridGeometry, cellIndexAt, cellRectPercent, nCells } from "./grid.js";

export interface AppOptions {
  /** How often to refresh the session view, in ms. */
  pollIntervalMs?: number;
}

type SubmitState = "idle" | "submitting" | "resolved" | "error";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.max(lo, Math.min(hi, v));
}

export class ReviewApp {
  private readonly root: HTMLElement;
  private readonly api: FeedbackApi;
  private readonly pollIntervalMs: number;

  private session: SessionView | null = null;
  private cases = new Map<string, CaseView>();
  private currentId: string | null = null;
  private selection = new Set<number>();
  private heatmapOn = false;
  private submitState: SubmitState = "idle";
  private submitMessage = "";
  private skipArmed = false;
  private serverUnreachable = false;
  private finished = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  // DOM regions, created once
  private banner: HTMLElement;
  private queuePane: HTMLElement;
  private casePane: HTMLElement;

  constructor(root: HTMLElement, api: FeedbackApi, options: AppOptions = {}) {
    this.root = root;
    this.api = api;
    this.pollIntervalMs = options.pollIntervalMs ?? 2000;
    this.banner = el("div", "banner");
    this.banner.hidden = true;
    this.queuePane = el("div", "queue");
    this.casePane = el("div", "case-pane");
    const layout = el("div", "layout");
    layout.append(this.queuePane, this.casePane);
    root.append(this.banner, layout);
  }

  async start(): Promise<void> {
    await this.poll();
    this.timer = setInterval(() => {
      void this.poll();
    }, this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  // -- session refresh ------------------------------------------------------

  private async poll(): Promise<void> {
    if (this.finished) return;
    let view: SessionView;
    try {
      view = await this.api.session();
    } catch (err) {
      this.onSessionError(err);
      return;
    }
    this.serverUnreachable = false;
    this.banner.hidden = true;
    this.session = view;
    const pending = new Set(view.pending_case_ids);
    const fetches: Promise<void>[] = [];
    for (const id of view.pending_case_ids) {
      if (!this.cases.has(id)) fetches.push(this.refreshCase(id));
    }
    // a case we thought pending that left the queue was resolved elsewhere
    for (const [id, c] of this.cases) {
      if (c.status === "pending" && !pending.has(id)) {
        fetches.push(this.refreshCase(id));
      }
    }
    await Promise.all(fetches);
    this.renderQueue();
    if (this.currentId === null) {
      const first = view.pending_case_ids[0];
      if (first !== undefined) this.openCase(first);
    }
    if (view.pending_case_ids.length === 0 && this.cases.size > 0) {
      this.renderCompletion();
    }
  }

  private onSessionError(err: unknown): void {
    if (this.allKnownResolved() && this.cases.size > 0) {
      // the run moved on after the last resolution; that is completion,
      // not an outage
      this.renderCompletion();
      return;
    }
    if (err instanceof ApiError && err.status === 404) {
      this.queuePane.replaceChildren(
        el("p", "waiting", "Waiting for a feedback session..."));
      return;
    }
    this.serverUnreachable = true;
    this.banner.textContent = "Server unreachable - retrying...";
    this.banner.hidden = false;
  }

  private async refreshCase(id: string): Promise<void> {
    try {
      this.cases.set(id, await this.api.caseDetail(id));
    } catch {
      // keep the stale payload; the next poll retries
    }
  }

  private allKnownResolved(): boolean {
    if (this.cases.size === 0) return false;
    for (const c of this.cases.values()) {
      if (c.status === "pending") return false;
    }
    return true;
  }

  // -- queue ---------------------------------------------------------------

  private orderedCases(): CaseView[] {
    return [...this.cases.values()].sort((a, b) => a.rank - b.rank);
  }

  private renderQueue(): void {
    const list = el("ul", "queue-list");
    for (const c of this.orderedCases()) {
      const row = el("li", "queue-row");
      row.dataset.id = c.sample_id;
      if (c.sample_id === this.currentId) row.classList.add("focused");
      const rank = el("span", "rank", `#${c.rank}`);
      const name = el("span", "sample", c.sample_id);
      const badge = el("span", `status-badge status-${c.status}`, c.status);
      row.append(rank, name, badge);
      if (c.status === "pending") {
        row.addEventListener("click", () => this.openCase(c.sample_id));
      } else {
        row.classList.add("readonly");
      }
      list.append(row);
    }
    const header = this.session
      ? el("p", "session-header",
          `${this.session.session_id} - epoch ${this.session.epoch} - ` +
          `${this.session.resolved_count}/${this.session.total_cases} resolved`)
      : el("p", "session-header", "");
    this.queuePane.replaceChildren(header, list);
  }

  // -- case view -------------------------------------------------------------

  openCase(id: string): void {
    const c = this.cases.get(id);
    if (!c) return;
    this.currentId = id;
    this.selection = new Set();
    this.heatmapOn = false;
    this.submitState = "idle";
    this.submitMessage = "";
    this.skipArmed = false;
    this.renderQueue();
    this.renderCase();
  }

  private current(): CaseView | null {
    return this.currentId === null
      ? null
      : this.cases.get(this.currentId) ?? null;
  }

  private renderCase(): void {
    const c = this.current();
    if (!c) {
      this.casePane.replaceChildren();
      return;
    }
    const panel = el("div", "case-panel");
    panel.dataset.id = c.sample_id;

    const title = el("h2", "case-title", `Case #${c.rank}: ${c.sample_id}`);

    const labels = el("p", "labels");
    const confidencePct = (c.confidence * 100).toFixed(2);
    labels.append(
      el("span", "predicted", `predicted ${c.predicted_label}`),
      el("span", "confidence", ` (${confidencePct}%)`),
      el("span", "truth", ` - truth ${c.true_label}`),
    );
    if (c.predicted_label !== c.true_label) labels.classList.add("mismatch");

    const frame = el("div", "image-frame");
    const img = el("img", "case-image") as HTMLImageElement;
    img.alt = c.sample_id;
    const overlay = el("div", "overlay");
    overlay.hidden = true;
    const imageError = el("div", "image-error");
    imageError.hidden = true;
    frame.append(img, overlay, imageError);

    img.addEventListener("load", () => {
      imageError.hidden = true;
      overlay.hidden = false;
      this.buildOverlay(overlay, img, c);
    });
    img.addEventListener("error", () => {
      overlay.hidden = true;
      imageError.hidden = false;
      const msg = el("p", undefined, "Image failed to load.");
      const retry = el("button", "image-retry", "Retry");
      retry.addEventListener("click", () => {
        imageError.hidden = true;
        const src = img.src;
        img.src = "";
        img.src = src;
      });
      imageError.replaceChildren(msg, retry);
    });
    img.src = this.heatmapOn ? this.api.heatmapUrl(c) : this.api.imageUrl(c);
    if (img.complete && img.naturalWidth > 0) {
      overlay.hidden = false;
      this.buildOverlay(overlay, img, c);
    }

    const heatmapBtn = el("button", "heatmap-btn",
      this.heatmapOn ? "Hide heatmap" : "Show heatmap");
    heatmapBtn.addEventListener("click", () => {
      this.heatmapOn = !this.heatmapOn;
      this.renderCase();
    });

    const submitBtn = el("button", "submit-btn",
      this.submitState === "submitting" ? "Submitting..." : "Submit selection");
    submitBtn.disabled = this.selection.size === 0
      || c.status !== "pending"
      || this.submitState === "submitting";
    submitBtn.addEventListener("click", () => void this.submit());

    const skipBtn = el("button", "skip-btn",
      this.skipArmed ? "Confirm skip" : "Skip");
    skipBtn.disabled = c.status !== "pending"
      || this.submitState === "submitting";
    skipBtn.addEventListener("click", () => void this.onSkipClick());

    const controls = el("div", "controls");
    controls.append(heatmapBtn, submitBtn, skipBtn);

    const status = el("p", "case-status", `status: ${c.status}`);
    const note = el("p", "submit-error", this.submitMessage);
    note.hidden = this.submitMessage === "";
    if (this.submitState === "error") {
      const retry = el("button", "submit-retry", "Retry");
      retry.addEventListener("click", () => void this.submit());
      note.append(" ", retry);
      note.hidden = false;
    }

    panel.append(title, labels, frame, controls, status, note);
    this.casePane.replaceChildren(panel);
  }

  private geometryOf(c: CaseView, img: HTMLImageElement): GridGeometry {
    return {
      rows: c.grid.rows,
      cols: c.grid.cols,
      imageHeight: img.naturalHeight,
      imageWidth: img.naturalWidth,
    };
  }

  private buildOverlay(
    overlay: HTMLElement, img: HTMLImageElement, c: CaseView,
  ): void {
    const g = this.geometryOf(c, img);
    overlay.replaceChildren();
    for (let i = 0; i < nCells(g); i++) {
      const rect = cellRectPercent(g, i);
      const cell = el("div", "cell");
      cell.dataset.cell = String(i);
      cell.style.top = `${rect.top}%`;
      cell.style.left = `${rect.left}%`;
      cell.style.height = `${rect.height}%`;
      cell.style.width = `${rect.width}%`;
      if (this.selection.has(i)) cell.classList.add("selected");
      overlay.append(cell);
    }
    overlay.onclick = (ev: MouseEvent) => {
      if (c.status !== "pending" || this.submitState === "submitting") return;
      const bounds = overlay.getBoundingClientRect();
      if (bounds.width <= 0 || bounds.height <= 0) return;
      const x = ev.clientX - bounds.left;
      const y = ev.clientY - bounds.top;
      const col = clamp(
        Math.floor((x * g.imageWidth) / bounds.width), 0, g.imageWidth - 1);
      const row = clamp(
        Math.floor((y * g.imageHeight) / bounds.height), 0, g.imageHeight - 1);
      this.toggleCell(cellIndexAt(g, row, col), overlay);
    };
  }

  private toggleCell(index: number, overlay: HTMLElement): void {
    if (this.selection.has(index)) {
      this.selection.delete(index);
    } else {
      this.selection.add(index);
    }
    this.skipArmed = false;
    for (const cell of overlay.querySelectorAll<HTMLElement>(".cell")) {
      const i = Number(cell.dataset.cell);
      cell.classList.toggle("selected", this.selection.has(i));
    }
    this.syncControls();
  }

  /** Refresh button/badge state without tearing down the image. */
  private syncControls(): void {
    const c = this.current();
    if (!c) return;
    const submitBtn = this.casePane.querySelector<HTMLButtonElement>(".submit-btn");
    if (submitBtn) {
      submitBtn.disabled = this.selection.size === 0
        || c.status !== "pending"
        || this.submitState === "submitting";
    }
    const skipBtn = this.casePane.querySelector<HTMLButtonElement>(".skip-btn");
    if (skipBtn) {
      skipBtn.textContent = this.skipArmed ? "Confirm skip" : "Skip";
      skipBtn.disabled = c.status !== "pending"
        || this.submitState === "submitting";
    }
  }

  // -- resolution flow -------------------------------------------------------

  private async submit(): Promise<void> {
    const c = this.current();
    if (!c || this.selection.size === 0) return;
    if (this.submitState === "submitting") return;
    this.submitState = "submitting";
    this.submitMessage = "";
    this.renderCase();
    try {
      const ack = await this.api.submitSelection(c.sample_id, this.selection);
      await this.markDone(c.sample_id, ack.action);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone else resolved it first; adopt the server's state
        await this.refreshCase(c.sample_id);
        this.submitState = "idle";
        await this.advance();
      } else if (err instanceof ApiError && err.status === 422) {
        this.submitState = "error";
        this.submitMessage = err.message;
        this.renderCase();
      } else {
        // network failure: the submission may or may not have landed; a
        // retry is safe because a duplicate is answered with 409
        this.submitState = "error";
        this.submitMessage = "Submission failed - check the connection.";
        this.renderCase();
      }
    }
  }

  private async onSkipClick(): Promise<void> {
    const c = this.current();
    if (!c || c.status !== "pending") return;
    if (!this.skipArmed) {
      this.skipArmed = true;
      this.syncControls();
      return;
    }
    this.skipArmed = false;
    this.submitState = "submitting";
    this.renderCase();
    try {
      const ack = await this.api.skip(c.sample_id);
      await this.markDone(c.sample_id, ack.action);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.refreshCase(c.sample_id);
        this.submitState = "idle";
        await this.advance();
      } else {
        this.submitState = "error";
        this.submitMessage = "Skip failed - check the connection.";
        this.renderCase();
      }
    }
  }

  private async markDone(
    id: string, action: "selection" | "skip",
  ): Promise<void> {
    const before = this.cases.get(id);
    await this.refreshCase(id);
    const after = this.cases.get(id);
    if (before && after === before) {
      // refresh failed (the run may already be tearing the service down);
      // trust the ack so completion still renders
      this.cases.set(id, {
        ...before,
        status: action === "selection" ? "resolved" : "skipped",
      });
    }
    this.submitState = "resolved";
    await this.advance();
  }

  private async advance(): Promise<void> {
    this.selection = new Set();
    this.skipArmed = false;
    try {
      this.session = await this.api.session();
    } catch {
      // fall back to local knowledge below
      this.session = null;
    }
    const pendingIds = this.session
      ? this.session.pending_case_ids
      : this.orderedCases()
          .filter((c) => c.status === "pending")
          .map((c) => c.sample_id);
    this.renderQueue();
    const next = pendingIds.find((id) => id !== this.currentId);
    if (next !== undefined) {
      if (!this.cases.has(next)) await this.refreshCase(next);
      this.openCase(next);
      return;
    }
    if (this.allKnownResolved()) {
      this.renderCompletion();
    } else {
      this.currentId = null;
      this.renderCase();
    }
  }

  private renderCompletion(): void {
    this.finished = true;
    this.stop();
    let resolved = 0;
    let skipped = 0;
    for (const c of this.cases.values()) {
      if (c.status === "resolved") resolved++;
      else if (c.status === "skipped") skipped++;
    }
    const done = el("div", "completion");
    done.append(
      el("h2", undefined, "Session complete"),
      el("p", "resolved-count", `${resolved} resolved`),
      el("p", "skipped-count", `${skipped} skipped`),
    );
    this.casePane.replaceChildren(done);
    this.renderQueue();
  }
}

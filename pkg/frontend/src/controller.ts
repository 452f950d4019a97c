import { ApiClient, ApiError } from "./client.js";
import { buildRunView, parseScoreInput, type RunView } from "./viewmodel.js";
import type { RunDoc } from "./types.js";

export type Correction =
  | { action: "set-score"; value: string }
  | { action: "toggle-prune" };

export interface CorrectionResult {
  ok: boolean;
  /** Inline validation/API error for the edited node, when not ok. */
  error?: string;
}

/**
 * Single-run editing session. Optimistic single-user flow: every mutation
 * awaits server confirmation (mutation + repropagate) before the view model
 * is rebuilt, so displayed values always equal the server's response.
 */
export class RunController {
  doc: RunDoc | null = null;
  view: RunView | null = null;
  banner: string | null = null;
  /** Node refs edited locally; cleared once the server confirms. */
  dirty = new Set<string>();
  /** Set when the revision advanced more than this session's own mutations. */
  stale = false;
  private runId: string | null = null;

  constructor(private readonly client: ApiClient) {}

  async load(runId: string): Promise<void> {
    this.runId = runId;
    try {
      const doc = await this.client.getRun(runId);
      this.adopt(doc, null);
      this.banner = null;
    } catch (err) {
      this.banner = err instanceof ApiError && err.status === 404
        ? "run not found"
        : `cannot reach server: ${err instanceof Error ? err.message : String(err)}`;
      this.doc = null;
      this.view = null;
    }
  }

  private adopt(doc: RunDoc, previous: RunDoc | null, expectedRevision?: number): void {
    if (expectedRevision !== undefined && doc.revision !== expectedRevision) {
      this.stale = true;
    }
    this.doc = doc;
    this.view = buildRunView(doc, previous);
    this.dirty.clear();
  }

  /** Apply one correction to a node and refresh from the repropagated document. */
  async submitCorrection(nodeRef: string, correction: Correction): Promise<CorrectionResult> {
    if (!this.runId || !this.doc) return { ok: false, error: "no run loaded" };
    let pending = this.doc.revision;
    this.dirty.add(nodeRef);
    try {
      if (correction.action === "set-score") {
        const score = parseScoreInput(correction.value);
        if (score === null) {
          this.dirty.delete(nodeRef);
          return { ok: false, error: "score must be a number in [0, 1]" };
        }
        await this.client.setLeafScore(this.runId, nodeRef, score);
        pending += 1;
      } else {
        const row = this.view?.rows.find((r) => r.ref === nodeRef);
        await this.client.setPruned(this.runId, nodeRef, !(row?.pruned ?? false));
        pending += 1;
      }
      const updated = await this.client.repropagate(this.runId);
      pending += 1;
      this.adopt(updated, this.doc, pending);
      return { ok: true };
    } catch (err) {
      this.dirty.delete(nodeRef);
      const message = err instanceof Error ? err.message : String(err);
      return { ok: false, error: message };
    }
  }

  async rescore(): Promise<CorrectionResult> {
    if (!this.runId || !this.doc) return { ok: false, error: "no run loaded" };
    try {
      const updated = await this.client.rescore(this.runId);
      this.adopt(updated, this.doc);
      return { ok: true };
    } catch (err) {
      return { ok: false, error: err instanceof Error ? err.message : String(err) };
    }
  }
}

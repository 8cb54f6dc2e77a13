// Batch controller: optimistic submits with rollback, conflict
// reconciliation, and completion accounting against the server.

import { ApiClient, ApiError, ConflictError, Verdict } from "./api.js";
import { BatchState, canSubmit, card, newBatch, submittedCount } from "./state.js";

export type SubmitOutcome =
  | { kind: "stored" }
  | { kind: "conflict" } // server already had a label; card locked, no duplicate
  | { kind: "rejected"; reason: "unplayed" | "no-verdict" | "not-pending" }
  | { kind: "failed"; message: string }; // rolled back, card editable again

export class BatchController {
  state: BatchState = newBatch([], false);
  sessionId = "";
  labelsStored = 0; // client-side count of labels the server acknowledged

  constructor(private readonly api: ApiClient) {}

  async start(language: string, proficiency: number): Promise<BatchState> {
    const session = await this.api.createSession(language, proficiency);
    this.sessionId = session.session_id;
    return this.loadBatch();
  }

  async loadBatch(): Promise<BatchState> {
    const batch = await this.api.nextClips(this.sessionId);
    this.state = newBatch(batch.clips, batch.exhausted);
    return this.state;
  }

  /** Submit one card. Never talks to the server unless the card is playable
   * and has a verdict (enforced here, not only in the view). */
  async submit(segmentId: string): Promise<SubmitOutcome> {
    const c = card(this.state, segmentId);
    if (c.status !== "pending") return { kind: "rejected", reason: "not-pending" };
    if (!c.played) return { kind: "rejected", reason: "unplayed" };
    if (c.selected === null) return { kind: "rejected", reason: "no-verdict" };
    if (!canSubmit(c)) return { kind: "rejected", reason: "not-pending" };

    const verdict: Verdict = c.selected;
    c.status = "submitting"; // optimistic
    try {
      await this.api.submitLabel(this.sessionId, segmentId, verdict);
      c.status = "done";
      this.labelsStored += 1;
      return { kind: "stored" };
    } catch (err) {
      if (err instanceof ConflictError) {
        // already labeled server-side: reconcile, count it, do not retry
        c.status = "done";
        c.conflicted = true;
        this.labelsStored += 1;
        return { kind: "conflict" };
      }
      c.status = "pending"; // rollback: card stays editable, selection kept
      const message = err instanceof ApiError ? err.message : String(err);
      return { kind: "failed", message };
    }
  }

  /** Completion per the client state; must equal the server-side count. */
  completedCount(): number {
    return submittedCount(this.state);
  }
}

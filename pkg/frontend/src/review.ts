// Rating session state machine, kept free of DOM so it is directly testable.
// Guards: submit only with both fields set, and never while a submission is
// in flight (double-submit protection).
import { fetchNext, submitRating } from "./api.js";
import type { ReviewCard } from "./types.js";

export type SessionState =
  | { phase: "idle" }
  | { phase: "rating"; card: ReviewCard; error?: string }
  | { phase: "submitting"; card: ReviewCard }
  | { phase: "done" };

export class ReviewSession {
  state: SessionState = { phase: "idle" };

  constructor(private base: string, private rater: string) {}

  canSubmit(): boolean {
    return (
      this.state.phase === "rating" &&
      this.state.card.understandable !== undefined &&
      this.state.card.quality !== undefined
    );
  }

  setUnderstandable(value: boolean): void {
    if (this.state.phase === "rating") {
      this.state.card.understandable = value;
    }
  }

  setQuality(value: number): void {
    if (this.state.phase !== "rating") {
      return;
    }
    if (!Number.isInteger(value) || value < 1 || value > 5) {
      throw new Error(`quality must be an integer in 1..5, got ${value}`);
    }
    this.state.card.quality = value;
  }

  async advance(): Promise<SessionState> {
    const next = await fetchNext(this.base, this.rater);
    this.state = next.kind === "done" ? { phase: "done" } : { phase: "rating", card: next.card };
    return this.state;
  }

  async submit(): Promise<SessionState> {
    if (!this.canSubmit() || this.state.phase !== "rating") {
      return this.state;
    }
    const card = this.state.card;
    this.state = { phase: "submitting", card };
    const result = await submitRating(this.base, card);
    if (result.kind === "ok") {
      return this.advance();
    }
    // rejected: keep the card and surface the server's message inline
    this.state = { phase: "rating", card, error: result.message };
    return this.state;
  }
}

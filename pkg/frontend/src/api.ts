// Thin client for the four review-service endpoints. All numbers shown in
// the UI come from these responses; nothing is recomputed client-side.
import type { NextResult, Progress, ReportResult, ReviewCard, SubmitResult } from "./types.js";

export async function fetchNext(base: string, rater: string): Promise<NextResult> {
  const resp = await fetch(`${base}/api/review/next?rater=${encodeURIComponent(rater)}`);
  if (resp.status === 204) {
    return { kind: "done" };
  }
  if (!resp.ok) {
    throw new Error(`review/next failed with status ${resp.status}`);
  }
  const body = await resp.json();
  const card: ReviewCard = {
    sampleId: body.sample_id,
    sentence: body.sentence,
    gloss: body.gloss,
    rater,
  };
  return { kind: "card", card };
}

export async function submitRating(base: string, card: ReviewCard): Promise<SubmitResult> {
  if (card.understandable === undefined || card.quality === undefined) {
    return { kind: "rejected", message: "both fields must be set" };
  }
  const resp = await fetch(`${base}/api/review/${encodeURIComponent(card.sampleId)}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({
      rater: card.rater,
      understandable: card.understandable,
      quality: card.quality,
    }),
  });
  if (resp.status === 200) {
    return { kind: "ok" };
  }
  if (resp.status === 422) {
    const body = await resp.json().catch(() => ({ error: "rejected" }));
    return { kind: "rejected", message: body.error ?? "rejected" };
  }
  throw new Error(`submit failed with status ${resp.status}`);
}

export async function fetchProgress(base: string, rater: string): Promise<Progress> {
  const resp = await fetch(`${base}/api/progress?rater=${encodeURIComponent(rater)}`);
  if (!resp.ok) {
    throw new Error(`progress failed with status ${resp.status}`);
  }
  return (await resp.json()) as Progress;
}

export async function fetchReport(base: string): Promise<ReportResult> {
  const resp = await fetch(`${base}/api/report`);
  if (resp.status === 200) {
    return { kind: "report", report: await resp.json() };
  }
  if (resp.status === 409) {
    const body = await resp.json().catch(() => ({ error: "report unavailable" }));
    return { kind: "unavailable", message: body.error ?? "report unavailable" };
  }
  throw new Error(`report failed with status ${resp.status}`);
}

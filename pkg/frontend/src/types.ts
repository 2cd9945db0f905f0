export interface ReviewCard {
  sampleId: string;
  sentence: string;
  gloss: string[];
  rater: string;
  understandable?: boolean;
  quality?: number;
}

export interface Progress {
  done: number;
  total: number;
}

export interface RaterSummary {
  validation_rate: number;
  avg_quality: number;
  high_pct: number;
  acceptable_pct: number;
  low_pct: number;
}

export interface KappaEntry {
  p_o: number;
  p_e: number;
  kappa: number;
  label: string;
}

export interface ReportJson {
  n_samples: number;
  rater_ids: string[];
  per_rater: Record<string, RaterSummary>;
  combined: RaterSummary;
  kappa_binary: KappaEntry;
  kappa_quality: KappaEntry;
  quality_weighting: string;
}

export type NextResult = { kind: "card"; card: ReviewCard } | { kind: "done" };

export type SubmitResult = { kind: "ok" } | { kind: "rejected"; message: string };

export type ReportResult =
  | { kind: "report"; report: ReportJson }
  | { kind: "unavailable"; message: string };

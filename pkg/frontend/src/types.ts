export type LabelState = "unmarked" | "relevant" | "not_relevant";

export interface SuggestionItem {
  id: number;
  score_visual: number;
  score_text: number;
  avg_rank: number;
}

export interface PhaseLatency {
  select: number;
  score: number;
  fuse: number;
  train: number;
}

export interface RoundStats {
  round: number;
  latency_ms: PhaseLatency;
  retrieve_ms: number;
  clusters_scored: number;
  items_scored: number;
}

export interface SuggestionsPayload {
  round: number;
  items: SuggestionItem[];
  stats: RoundStats;
}

export interface CollectionInfo {
  id: string;
  n: number;
  dims: { visual: number; text: number };
  seed: number;
  thumbnail_template: string | null;
}

export interface SessionParams {
  k: number;
  r: number;
  b: number;
  w: number;
  s_c: number;
  s_m: number | null;
}

export interface FeedbackPayload {
  relevant: number[];
  not_relevant: number[];
}

/** Stored (feature id, value) slots per modality, for glyph rendering. */
export interface ItemFeatures {
  visual: [number, number][];
  text: [number, number][];
}

export interface GridItem {
  id: number;
  labelState: LabelState;
  scoreVisual: number;
  scoreText: number;
  avgRank: number;
  thumbnailUrl: string | null;
}

/**
 * Wire-format and view-state types for the annotation service client.
 *
 * Everything here mirrors the JSON shapes served under /api/v1; the UI
 * never derives state from anywhere else.
 */

/** Annotation pipeline modes offered by the server. */
export type Mode = "AR" | "EAL" | "FA" | "HFA" | "UFA";

/** Auto-annotation confidence-ratio thresholds per mode (no entry: manual only). */
export const MODE_THRESHOLDS: Partial<Record<Mode, number>> = {
  FA: 0.10,
  HFA: 0.15,
  UFA: 0.20,
};

/** One token of a sentence as served by the batch endpoint. */
export interface WireToken {
  surface: string;
  pos: string;
}

/** Half-open token span [start, end) inside one sentence. */
export interface SpanLabel {
  sentence_id: number;
  start: number;
  end: number;
}

/** A sentence in the current labeling batch. */
export interface BatchSentence {
  sentence_id: number;
  tokens: WireToken[];
  /** Model predictions shown as pre-highlights, never auto-submitted. */
  prehighlights: { start: number; end: number }[];
}

/** Batch payload: the sentences awaiting human labels. */
export interface BatchPayload {
  revision: number;
  sentences: BatchSentence[];
  mode: Mode;
  iteration: number;
}

/** One point of the per-iteration metrics history. */
export interface MetricPoint {
  iteration: number;
  labeled_count: number;
  auto_count: number;
  sigma: number;
  estimated_coverage: number;
  f_score: number | null;
}

/** Metrics endpoint payload. */
export interface MetricsPayload {
  revision: number;
  training: boolean;
  history: MetricPoint[];
  labeled: number;
  auto: number;
}

/** One ranked seed-expansion candidate. */
export interface Candidate {
  surface: string;
  score: number;
}

/** Session creation response. */
export interface SessionHandle {
  session_id: string;
  revision: number;
  pool_size: number;
}

/**
 * Client-side mirror of a server session. Only mutated when a server
 * response acknowledges the change; `revision` gates every mutation.
 */
export interface ViewSession {
  sessionId: string;
  revision: number;
  mode: Mode;
  poolSize: number;
  history: MetricPoint[];
  batch: BatchSentence[];
  iteration: number;
}

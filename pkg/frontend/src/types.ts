/** Payload shapes of the orchestrator control API, verbatim.
 *
 * The dashboard is a pure client: these are the only sources of data it
 * ever renders. Field names match the JSON on the wire.
 */

export interface CandidateSummary {
  design: number[];
  objective: number | null;
  round: number;
  eval_index: number;
  provenance: string;
}

export interface StudySnapshot {
  study: string;
  phase: string;
  direction: string;
  backend: { kind: string; [key: string]: unknown };
  policy: string;
  rounds_planned: number;
  rounds_completed: number;
  eval_count: number;
  incumbent: CandidateSummary | null;
  paused: boolean;
  finished: boolean;
  stop_reason: string | null;
}

export interface RoundSummary {
  round: number;
  best: CandidateSummary | null;
  incumbent: CandidateSummary | null;
  n_candidates: number;
  n_failed: number;
  note: string;
}

export interface TraceEvent {
  ts: number;
  round: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TracePage {
  events: TraceEvent[];
  offset: number;
  next_offset: number;
  total: number;
}

export interface FieldExport {
  nx: number;
  ny: number;
  dx: number;
  dy: number;
  x_origin: number;
  /** Row-major nx*ny densities. */
  data: number[];
  objective: number;
  design: number[];
}

export interface CommandAck {
  ok: boolean;
  type: string;
  phase: string;
  note?: string;
}

export interface ApiErrorBody {
  error: string;
  message: string;
}

export type Command =
  | { type: "pause" | "resume" | "stop" | "approve_round" }
  | { type: "set_bounds"; lower: number[]; upper: number[] };

export type CommandType = Command["type"];

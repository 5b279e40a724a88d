import type {
  CandidateSummary,
  CommandType,
  RoundSummary,
  StudySnapshot,
  TraceEvent,
} from "./types.js";

/** One chart marker: incumbent objective at the evaluation that found it. */
export interface ConvergencePoint {
  eval_index: number;
  objective: number;
}

export interface CandidateRow {
  round: number;
  eval_index: number;
  design: number[];
  objective: number | null;
  provenance: string;
  failed: boolean;
  error: string | null;
}

export interface ActivityLine {
  kind: string;
  text: string;
}

/** Everything the page shows. Populated only from API payloads; the
 * client never computes an objective value of its own. */
export class StudyView {
  study = "";
  phase = "";
  direction = "";
  policy = "";
  backendKind = "";
  roundsPlanned = 0;
  roundsCompleted = 0;
  evalCount = 0;
  incumbent: CandidateSummary | null = null;
  rounds: RoundSummary[] = [];
  candidates: CandidateRow[] = [];
  activity: ActivityLine[] = [];
  series: ConvergencePoint[] = [];
  connected = false;
  paused = false;
  finished = false;
  stopReason: string | null = null;
  lastError: string | null = null;
}

function pushSeriesPoint(view: StudyView, incumbent: CandidateSummary | null): void {
  if (incumbent === null || incumbent.objective === null) return;
  const last = view.series[view.series.length - 1];
  // Strictly increasing x: an unchanged incumbent re-reports the same
  // eval_index, which would stack a duplicate marker.
  if (last !== undefined && incumbent.eval_index <= last.eval_index) return;
  view.series.push({ eval_index: incumbent.eval_index, objective: incumbent.objective });
}

/** Snapshot-then-stream: build the view a reconnect starts from. */
export function fromSnapshot(snapshot: StudySnapshot, rounds: RoundSummary[]): StudyView {
  const view = new StudyView();
  view.study = snapshot.study;
  view.phase = snapshot.phase;
  view.direction = snapshot.direction;
  view.policy = snapshot.policy;
  view.backendKind = snapshot.backend.kind;
  view.roundsPlanned = snapshot.rounds_planned;
  view.roundsCompleted = snapshot.rounds_completed;
  view.evalCount = snapshot.eval_count;
  view.incumbent = snapshot.incumbent;
  view.paused = snapshot.paused;
  view.finished = snapshot.finished;
  view.stopReason = snapshot.stop_reason;
  view.rounds = [...rounds];
  for (const round of rounds) pushSeriesPoint(view, round.incumbent);
  view.connected = true;
  return view;
}

/** Apply one trace event. Returns the view for chaining. */
export function applyEvent(view: StudyView, event: TraceEvent): StudyView {
  const p = event.payload;
  switch (event.kind) {
    case "round_start":
      view.activity.push({
        kind: event.kind,
        text: `round ${String(p["round"])} started (${String(p["policy"])})`,
      });
      break;
    case "candidate_evaluated": {
      view.candidates.push({
        round: event.round,
        eval_index: p["eval_index"] as number,
        design: p["design"] as number[],
        objective: (p["objective"] ?? null) as number | null,
        provenance: String(p["provenance"] ?? ""),
        failed: Boolean(p["failed"]),
        error: (p["error"] ?? null) as string | null,
      });
      view.evalCount = Math.max(view.evalCount, p["eval_index"] as number);
      break;
    }
    case "round_complete": {
      const summary = p as unknown as RoundSummary;
      view.rounds.push(summary);
      view.roundsCompleted = view.rounds.length;
      if (summary.incumbent !== null) view.incumbent = summary.incumbent;
      pushSeriesPoint(view, summary.incumbent);
      break;
    }
    case "agent_turn":
      view.activity.push({
        kind: event.kind,
        text: `${String(p["speaker"])}: ${String(p["message"])}`,
      });
      break;
    case "expert_action":
      view.activity.push({ kind: event.kind, text: `expert: ${String(p["action"])}` });
      break;
    case "study_end":
      view.finished = true;
      view.stopReason = String(p["reason"] ?? "");
      view.activity.push({ kind: event.kind, text: `study ended (${view.stopReason})` });
      break;
    default:
      view.activity.push({ kind: event.kind, text: JSON.stringify(p) });
  }
  return view;
}

/** Chart x-axis must be strictly increasing in eval_index. */
export function seriesIsStrictlyIncreasing(series: ConvergencePoint[]): boolean {
  return series.every((p, i) => i === 0 || p.eval_index > series[i - 1]!.eval_index);
}

export function seriesIsMonotone(series: ConvergencePoint[], direction: string): boolean {
  return series.every((p, i) => {
    if (i === 0) return true;
    const prev = series[i - 1]!.objective;
    return direction === "maximize" ? p.objective >= prev : p.objective <= prev;
  });
}

const BOUNDS_COMMANDS: ReadonlySet<CommandType> = new Set([
  "pause",
  "resume",
  "stop",
  "approve_round",
  "set_bounds",
]);

/** Gate for the command buttons: one in-flight command at a time, and
 * nothing but export once the study is over. */
export class ControlState {
  pendingCommand: CommandType | null = null;
  boundsDraft: { lower: string[]; upper: string[] };

  constructor(dim = 4) {
    this.boundsDraft = {
      lower: new Array<string>(dim).fill(""),
      upper: new Array<string>(dim).fill(""),
    };
  }

  approvalPending(view: StudyView): boolean {
    return view.phase === "AwaitingExpert" && !view.finished;
  }

  canSend(type: CommandType, view: StudyView): boolean {
    if (!BOUNDS_COMMANDS.has(type)) return false;
    if (!view.connected || view.finished || this.pendingCommand !== null) return false;
    if (type === "approve_round") return this.approvalPending(view);
    if (type === "resume") return view.paused;
    if (type === "pause") return !view.paused;
    return true;
  }

  /** Client-side check that mirrors the server's rules; a draft that
   * fails here is never POSTed. */
  validateBounds(): string | null {
    const { lower, upper } = this.boundsDraft;
    if (lower.length !== upper.length) return "lower and upper must have equal length";
    for (let i = 0; i < lower.length; i++) {
      const lo = Number(lower[i]);
      const hi = Number(upper[i]);
      if (lower[i] === "" || upper[i] === "" || Number.isNaN(lo) || Number.isNaN(hi)) {
        return `axis ${i + 1}: bounds must be numbers`;
      }
      if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
        return `axis ${i + 1}: bounds must be finite`;
      }
      if (lo >= hi) {
        return `axis ${i + 1}: lower ${lower[i]} must be below upper ${upper[i]}`;
      }
    }
    return null;
  }

  parsedBounds(): { lower: number[]; upper: number[] } {
    return {
      lower: this.boundsDraft.lower.map(Number),
      upper: this.boundsDraft.upper.map(Number),
    };
  }
}

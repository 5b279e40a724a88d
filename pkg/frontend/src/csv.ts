import type { ConvergencePoint } from "./view.js";

/** Convergence export with the same columns the study writer emits. */
export function convergenceCsv(runId: string, series: ConvergencePoint[]): string {
  const lines = ["run_id,eval_index,best_objective"];
  for (const point of series) {
    lines.push(`${runId},${point.eval_index},${point.objective}`);
  }
  return lines.join("\n") + "\n";
}

import type { ConvergencePoint } from "./view.js";

export interface ChartOptions {
  width?: number;
  height?: number;
  /** Label under the x axis; purely descriptive text. */
  xLabel?: string;
}

const MARGIN = { top: 12, right: 16, bottom: 34, left: 64 };

function scale(value: number, lo: number, hi: number, out0: number, out1: number): number {
  if (hi === lo) return (out0 + out1) / 2;
  return out0 + ((value - lo) / (hi - lo)) * (out1 - out0);
}

/** Render the convergence polyline as an SVG string.
 *
 * Every number that appears as visible text (tick labels) is a value
 * taken verbatim from the series, which itself comes verbatim from API
 * payloads; pixel positions live only in attributes.
 */
export function renderConvergenceSvg(
  series: ConvergencePoint[],
  options: ChartOptions = {},
): string {
  const width = options.width ?? 480;
  const height = options.height ?? 240;
  const xLabel = options.xLabel ?? "evaluations";
  if (series.length === 0) {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `class="convergence-chart empty"><text x="${width / 2}" y="${height / 2}" ` +
      `text-anchor="middle">no completed rounds yet</text></svg>`
    );
  }

  const xs = series.map((p) => p.eval_index);
  const ys = series.map((p) => p.objective);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(...ys);
  const yHi = Math.max(...ys);
  const plotX = (v: number) => scale(v, xLo, xHi, MARGIN.left, width - MARGIN.right);
  const plotY = (v: number) => scale(v, yLo, yHi, height - MARGIN.bottom, MARGIN.top);

  const points = series
    .map((p) => `${plotX(p.eval_index).toFixed(1)},${plotY(p.objective).toFixed(1)}`)
    .join(" ");
  const markers = series
    .map(
      (p) =>
        `<circle class="marker" cx="${plotX(p.eval_index).toFixed(1)}" ` +
        `cy="${plotY(p.objective).toFixed(1)}" r="3.5"/>`,
    )
    .join("");
  const xTicks = series
    .map(
      (p) =>
        `<text class="tick x" x="${plotX(p.eval_index).toFixed(1)}" ` +
        `y="${height - MARGIN.bottom + 16}" text-anchor="middle">${p.eval_index}</text>`,
    )
    .join("");
  const yTicks = [yLo, yHi]
    .filter((v, i, arr) => arr.indexOf(v) === i)
    .map(
      (v) =>
        `<text class="tick y" x="${MARGIN.left - 8}" y="${(plotY(v) + 4).toFixed(1)}" ` +
        `text-anchor="end">${v}</text>`,
    )
    .join("");

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `class="convergence-chart" role="img">` +
    `<line class="axis" x1="${MARGIN.left}" y1="${height - MARGIN.bottom}" ` +
    `x2="${width - MARGIN.right}" y2="${height - MARGIN.bottom}"/>` +
    `<line class="axis" x1="${MARGIN.left}" y1="${MARGIN.top}" ` +
    `x2="${MARGIN.left}" y2="${height - MARGIN.bottom}"/>` +
    `<polyline class="incumbent" fill="none" points="${points}"/>` +
    markers +
    xTicks +
    yTicks +
    `<text class="label" x="${(MARGIN.left + width - MARGIN.right) / 2}" ` +
    `y="${height - 6}" text-anchor="middle">${xLabel}</text>` +
    `</svg>`
  );
}

/** Count of data markers in a rendered chart (test hook, cheap parse). */
export function markerCount(svg: string): number {
  return (svg.match(/<circle class="marker"/g) ?? []).length;
}

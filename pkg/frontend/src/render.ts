import type { StudyView } from "./view.js";
import type { CandidateSummary } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Numbers are stringified as received; the client never reformats or
 * recomputes a value it shows. */
function num(value: number | null): string {
  return value === null ? "-" : String(value);
}

function design(values: number[]): string {
  return values.map(String).join(", ");
}

function incumbentCell(c: CandidateSummary | null): string {
  if (c === null) return "<td>-</td><td>-</td>";
  return `<td>[${design(c.design)}]</td><td>${num(c.objective)}</td>`;
}

export function renderHeaderHtml(view: StudyView): string {
  const inc = view.incumbent;
  return (
    `<dl class="study-header">` +
    `<dt>study</dt><dd>${esc(view.study)}</dd>` +
    `<dt>phase</dt><dd>${esc(view.phase)}</dd>` +
    `<dt>direction</dt><dd>${esc(view.direction)}</dd>` +
    `<dt>policy</dt><dd>${esc(view.policy)}</dd>` +
    `<dt>backend</dt><dd>${esc(view.backendKind)}</dd>` +
    `<dt>rounds</dt><dd>${view.roundsCompleted} of ${view.roundsPlanned}</dd>` +
    `<dt>evaluations</dt><dd>${view.evalCount}</dd>` +
    `<dt>incumbent</dt><dd>${
      inc === null ? "-" : `[${design(inc.design)}] at ${num(inc.objective)}`
    }</dd>` +
    (view.finished ? `<dt>finished</dt><dd>${esc(view.stopReason ?? "")}</dd>` : "") +
    `</dl>`
  );
}

export function renderRoundsTableHtml(view: StudyView): string {
  const rows = view.rounds
    .map(
      (r) =>
        `<tr><td>${r.round}</td>${incumbentCell(r.best)}${incumbentCell(r.incumbent)}` +
        `<td>${r.n_candidates}</td><td>${r.n_failed}</td><td>${esc(r.note)}</td></tr>`,
    )
    .join("");
  return (
    `<table class="rounds"><thead><tr><th>round</th><th>best design</th>` +
    `<th>best</th><th>incumbent design</th><th>incumbent</th>` +
    `<th>candidates</th><th>failed</th><th>note</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderCandidatesTableHtml(view: StudyView, limit = 50): string {
  const rows = view.candidates
    .slice(-limit)
    .map(
      (c) =>
        `<tr class="${c.failed ? "failed" : "ok"}"><td>${c.eval_index}</td>` +
        `<td>${c.round}</td><td>[${design(c.design)}]</td><td>${num(c.objective)}</td>` +
        `<td>${esc(c.provenance)}</td><td>${esc(c.error ?? "")}</td></tr>`,
    )
    .join("");
  return (
    `<table class="candidates"><thead><tr><th>eval</th><th>round</th>` +
    `<th>design</th><th>objective</th><th>provenance</th><th>error</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderActivityHtml(view: StudyView, limit = 30): string {
  const items = view.activity
    .slice(-limit)
    .map((line) => `<li class="${esc(line.kind)}">${esc(line.text)}</li>`)
    .join("");
  return `<ol class="activity">${items}</ol>`;
}

export function renderBannerHtml(view: StudyView): string {
  if (!view.connected) {
    return `<div class="banner disconnected">disconnected, retrying</div>`;
  }
  if (view.lastError !== null) {
    return `<div class="banner error">${esc(view.lastError)}</div>`;
  }
  if (view.paused) {
    return `<div class="banner paused">paused</div>`;
  }
  return "";
}

/** All visible text of an HTML or SVG snippet, tags stripped.
 *
 * This is what "displayed" means for the pure-client check: attribute
 * values (pixel coordinates, class names) are not displayed text.
 */
export function visibleText(markup: string): string {
  return markup.replace(/<[^>]*>/g, " ");
}

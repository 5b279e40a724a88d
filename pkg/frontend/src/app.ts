import { ApiClient } from "./api.js";
import { renderConvergenceSvg } from "./chart.js";
import { DashboardController } from "./controller.js";
import { convergenceCsv } from "./csv.js";
import { renderFieldImage } from "./field.js";
import {
  renderActivityHtml,
  renderBannerHtml,
  renderCandidatesTableHtml,
  renderHeaderHtml,
  renderRoundsTableHtml,
} from "./render.js";
import type { StudyView } from "./view.js";
import type { CommandType } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return override ?? window.location.origin;
}

const api = new ApiClient(apiBase());
const controller = new DashboardController(api);

const buttons: Record<string, "pause" | "resume" | "approve_round" | "stop"> = {
  "btn-pause": "pause",
  "btn-resume": "resume",
  "btn-approve": "approve_round",
  "btn-stop": "stop",
};

function readBoundsDraft(): void {
  for (let i = 0; i < 4; i++) {
    controller.control.boundsDraft.lower[i] =
      el<HTMLInputElement>(`lower-${i}`).value.trim();
    controller.control.boundsDraft.upper[i] =
      el<HTMLInputElement>(`upper-${i}`).value.trim();
  }
}

async function drawField(view: StudyView): Promise<void> {
  const notice = el<HTMLElement>("field-notice");
  if (view.backendKind !== "surrogate") {
    notice.textContent = "field preview needs the surrogate backend";
    return;
  }
  if (view.incumbent === null) {
    notice.textContent = "no incumbent yet";
    return;
  }
  const field = await api.getField(view.incumbent.design);
  const image = renderFieldImage(field);
  const canvas = el<HTMLCanvasElement>("field-canvas");
  canvas.width = image.width;
  canvas.height = image.height;
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  ctx.putImageData(new ImageData(image.rgba, image.width, image.height), 0, 0);
  notice.textContent = `objective ${field.objective} at [${field.design.join(", ")}]`;
}

function exportCsv(view: StudyView): void {
  const blob = new Blob([convergenceCsv(view.study, view.series)],
                        { type: "text/csv" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `${view.study || "study"}-convergence.csv`;
  link.click();
  URL.revokeObjectURL(link.href);
}

function redraw(view: StudyView): void {
  el("banner").innerHTML = renderBannerHtml(view);
  el("header").innerHTML = renderHeaderHtml(view);
  el("chart").innerHTML = renderConvergenceSvg(view.series);
  el("rounds").innerHTML = renderRoundsTableHtml(view);
  el("candidates").innerHTML = renderCandidatesTableHtml(view);
  el("activity").innerHTML = renderActivityHtml(view);
  for (const [id, type] of Object.entries(buttons)) {
    el<HTMLButtonElement>(id).disabled = !controller.control.canSend(type, view);
  }
  el<HTMLButtonElement>("btn-bounds").disabled =
    !controller.control.canSend("set_bounds", view);
  el<HTMLButtonElement>("btn-export").disabled = view.series.length === 0;
}

for (const [id, type] of Object.entries(buttons)) {
  el<HTMLButtonElement>(id).addEventListener("click", () => {
    void controller.send({ type });
  });
}
el<HTMLButtonElement>("btn-bounds").addEventListener("click", () => {
  readBoundsDraft();
  void controller.sendSetBounds();
});
el<HTMLButtonElement>("btn-export").addEventListener("click", () =>
  exportCsv(controller.view));
el<HTMLButtonElement>("btn-field").addEventListener("click", () => {
  void drawField(controller.view);
});

controller.onChange = redraw;
void controller.run();

import type { FieldExport } from "./types.js";

/** Copper is drawn dark, air light; densities in between interpolate. */
const COPPER_RGB: readonly [number, number, number] = [62, 39, 35];
const AIR_RGB: readonly [number, number, number] = [245, 240, 230];

export interface FieldImage {
  width: number;
  height: number;
  /** RGBA, row-major, one pixel per grid cell. */
  rgba: Uint8ClampedArray<ArrayBuffer>;
}

/** Map the exported density grid to pixels, one cell each.
 *
 * The normalization range comes from the payload itself (its min and
 * max), so a two-density grid renders as exactly two tones with the
 * interface between them visible.
 */
export function renderFieldImage(field: FieldExport): FieldImage {
  const { nx, ny, data } = field;
  if (data.length !== nx * ny) {
    throw new Error(`field data length ${data.length} does not match ${nx}x${ny}`);
  }
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of data) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const span = hi > lo ? hi - lo : 1;
  const rgba = new Uint8ClampedArray(nx * ny * 4);
  for (let i = 0; i < data.length; i++) {
    const t = (data[i]! - lo) / span;
    for (let c = 0; c < 3; c++) {
      rgba[i * 4 + c] = Math.round(AIR_RGB[c]! + t * (COPPER_RGB[c]! - AIR_RGB[c]!));
    }
    rgba[i * 4 + 3] = 255;
  }
  return { width: nx, height: ny, rgba };
}

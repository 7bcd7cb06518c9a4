// Value-to-colour mapping shared by the 3D view and the legend. Keeping a
// single code path is what makes "legend colour == rendered colour" hold.

import type { ValueRange } from "./types.js";

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

/**
 * Fixed perceptually-ordered ramp, dark blue through green to bright
 * yellow, evenly spaced over the normalised [0, 1] interval.
 */
export const COLOR_STOPS: ReadonlyArray<Rgb> = [
  { r: 0.267, g: 0.005, b: 0.329 },
  { r: 0.283, g: 0.141, b: 0.458 },
  { r: 0.254, g: 0.265, b: 0.530 },
  { r: 0.207, g: 0.372, b: 0.553 },
  { r: 0.164, g: 0.471, b: 0.558 },
  { r: 0.128, g: 0.567, b: 0.551 },
  { r: 0.135, g: 0.659, b: 0.518 },
  { r: 0.267, g: 0.749, b: 0.441 },
  { r: 0.478, g: 0.821, b: 0.318 },
  { r: 0.741, g: 0.873, b: 0.150 },
  { r: 0.993, g: 0.906, b: 0.144 },
];

/** Map a value in [0, 1] onto the ramp by linear interpolation between stops. */
export function rampColor(t: number): Rgb {
  const clamped = t <= 0 ? 0 : t >= 1 ? 1 : t;
  const scaled = clamped * (COLOR_STOPS.length - 1);
  const lo = Math.floor(scaled);
  const hi = Math.min(lo + 1, COLOR_STOPS.length - 1);
  const frac = scaled - lo;
  const a = COLOR_STOPS[lo];
  const b = COLOR_STOPS[hi];
  return {
    r: a.r + (b.r - a.r) * frac,
    g: a.g + (b.g - a.g) * frac,
    b: a.b + (b.b - a.b) * frac,
  };
}

/**
 * Map a data value onto the ramp given the current legend range. A
 * degenerate range (min == max) maps everything to the top stop so a
 * single-valued dataset is still visible.
 */
export function colorForValue(value: number, range: ValueRange): Rgb {
  if (range.max <= range.min) return rampColor(1);
  return rampColor((value - range.min) / (range.max - range.min));
}

/**
 * Fill `out` (3 floats per point) with ramp colours for `values` under
 * `range`. Used both when building a mesh and when re-colouring after the
 * legend range grows.
 */
export function writeColors(
  values: Float32Array,
  range: ValueRange,
  out: Float32Array,
  verticesPerPoint: number,
): void {
  for (let i = 0; i < values.length; i++) {
    const c = colorForValue(values[i], range);
    for (let v = 0; v < verticesPerPoint; v++) {
      const base = (i * verticesPerPoint + v) * 3;
      out[base] = c.r;
      out[base + 1] = c.g;
      out[base + 2] = c.b;
    }
  }
}

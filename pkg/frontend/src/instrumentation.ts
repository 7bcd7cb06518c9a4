// Performance instrumentation: per-display samples, a rolling FPS counter
// and heap accounting. Where the browser exposes heap numbers they are
// used; otherwise byte estimates from the cache layer stand in, and the
// panel labels them as estimates either way.

import type { MessageBus } from "./bus.js";
import type { InstrumentationSample } from "./types.js";

interface MemoryInfo {
  usedJSHeapSize: number;
}

/** Chromium exposes performance.memory; everywhere else this is undefined. */
export function browserHeapBytes(): number | null {
  const perf = globalThis.performance as { memory?: MemoryInfo } | undefined;
  const used = perf?.memory?.usedJSHeapSize;
  return typeof used === "number" ? used : null;
}

export interface RegressionResult {
  slope: number;
  intercept: number;
  r2: number;
}

/** Ordinary least squares of y on x. Needs at least two distinct x. */
export function linearRegression(x: number[], y: number[]): RegressionResult {
  const n = x.length;
  if (n !== y.length || n < 2) throw new Error("regression needs two paired samples");
  let sx = 0;
  let sy = 0;
  for (let i = 0; i < n; i++) {
    sx += x[i];
    sy += y[i];
  }
  const mx = sx / n;
  const my = sy / n;
  let sxx = 0;
  let sxy = 0;
  let syy = 0;
  for (let i = 0; i < n; i++) {
    const dx = x[i] - mx;
    const dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx === 0) throw new Error("regression needs two distinct x values");
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  const r2 = syy === 0 ? 1 : (sxy * sxy) / (sxx * syy);
  return { slope, intercept, r2 };
}

export function median(values: number[]): number {
  if (values.length === 0) throw new Error("median of empty list");
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 === 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}

/** Frames remembered by the FPS counter; ~2 s of history at 60 Hz. */
const FPS_WINDOW = 120;

export class FpsCounter {
  private stamps: number[] = [];

  frame(nowMs: number): void {
    this.stamps.push(nowMs);
    if (this.stamps.length > FPS_WINDOW) this.stamps.shift();
  }

  /** Frames per second over the remembered window; 0 until two frames seen. */
  current(): number {
    const n = this.stamps.length;
    if (n < 2) return 0;
    const span = this.stamps[n - 1] - this.stamps[0];
    if (span <= 0) return 0;
    return ((n - 1) / span) * 1000;
  }

  reset(): void {
    this.stamps = [];
  }
}

/**
 * Collects samples published on the bus and answers the summary questions
 * the panel displays: per-point display cost, heap growth per point, FPS.
 */
export class Instrumentation {
  readonly samples: InstrumentationSample[] = [];
  readonly fpsCounter = new FpsCounter();
  /** True when heap numbers come from the browser, not from estimates. */
  readonly heapIsMeasured: boolean = browserHeapBytes() !== null;

  constructor(private bus: MessageBus) {}

  record(sample: InstrumentationSample): void {
    this.samples.push(sample);
    this.bus.publish("instrumentation/sample", { sample });
  }

  frame(nowMs: number): void {
    this.fpsCounter.frame(nowMs);
  }

  publishFps(): void {
    this.bus.publish("instrumentation/fps", { fps: this.fpsCounter.current() });
  }

  /** First (non-cached) display samples, in display order. */
  initialDisplays(): InstrumentationSample[] {
    return this.samples.filter((s) => !s.fromCache);
  }

  /** Median of time/points across initial displays with at least one point. */
  medianPerPointMs(): number {
    const perPoint = this.initialDisplays()
      .filter((s) => s.nPoints > 0)
      .map((s) => s.timeToDisplayMs / s.nPoints);
    if (perPoint.length === 0) return 0;
    return median(perPoint);
  }

  /**
   * Regression of cumulative heap bytes against cumulative points over the
   * initial displays: the slope is the marginal cost of one more point.
   */
  heapRegression(): RegressionResult {
    const displays = this.initialDisplays().filter((s) => s.nPoints > 0);
    let points = 0;
    let bytes = 0;
    const xs: number[] = [];
    const ys: number[] = [];
    for (const s of displays) {
      points += s.nPoints;
      bytes += s.heapDeltaBytes;
      xs.push(points);
      ys.push(bytes);
    }
    return linearRegression(xs, ys);
  }

  totalPoints(): number {
    let total = 0;
    for (const s of this.samples) if (!s.fromCache) total += s.nPoints;
    return total;
  }
}

// Display-only components: the legend strip, the performance readout and
// the error banner. Each one is fed exclusively by bus messages and only
// touches the DOM element it was given, so they all run headless too.

import type { MessageBus } from "./bus.js";
import { rampColor } from "./color.js";
import type { InstrumentationSample, ValueRange } from "./types.js";

/**
 * Colour legend drawn on an HTML5 canvas. The gradient uses the same ramp
 * the meshes use, and the labels always show the displayed data's range.
 */
export class LegendPanel {
  range: ValueRange | null = null;
  label = "";
  redraws = 0;

  constructor(bus: MessageBus, private canvas: HTMLCanvasElement | null = null) {
    bus.subscribe("legend/updated", ({ range, label }) => {
      this.range = range;
      this.label = label;
      this.redraws += 1;
      this.draw();
    });
  }

  private draw(): void {
    const ctx = this.canvas?.getContext("2d");
    if (!this.canvas || !ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    if (!this.range) return;
    for (let x = 0; x < width; x++) {
      const c = rampColor(x / (width - 1));
      ctx.fillStyle = `rgb(${Math.round(c.r * 255)}, ${Math.round(c.g * 255)}, ${Math.round(c.b * 255)})`;
      ctx.fillRect(x, 0, 1, height - 14);
    }
    ctx.fillStyle = "#dde4f0";
    ctx.font = "11px sans-serif";
    ctx.textBaseline = "bottom";
    ctx.textAlign = "left";
    ctx.fillText(this.range.min.toFixed(1), 1, height);
    ctx.textAlign = "right";
    ctx.fillText(this.range.max.toFixed(1), width - 1, height);
    ctx.textAlign = "center";
    ctx.fillText(this.label, width / 2, height);
  }
}

/** Textual performance panel: last sample, totals and current FPS. */
export class InstrumentationPanel {
  lastSample: InstrumentationSample | null = null;
  fps = 0;
  totalPoints = 0;
  totalHeapBytes = 0;
  heapLabel: string;

  constructor(
    bus: MessageBus,
    private element: HTMLElement | null = null,
    heapIsMeasured = false,
  ) {
    this.heapLabel = heapIsMeasured ? "heap" : "heap est.";
    bus.subscribe("instrumentation/sample", ({ sample }) => {
      this.lastSample = sample;
      if (!sample.fromCache) {
        this.totalPoints += sample.nPoints;
        this.totalHeapBytes += sample.heapDeltaBytes;
      }
      this.render();
    });
    bus.subscribe("instrumentation/fps", ({ fps }) => {
      this.fps = fps;
      this.render();
    });
    bus.subscribe("dataset/cleared", () => {
      this.totalPoints = 0;
      this.totalHeapBytes = 0;
      this.render();
    });
  }

  lines(): string[] {
    const out = [
      `fps ${this.fps.toFixed(0)}`,
      `points ${this.totalPoints}`,
      `${this.heapLabel} ${(this.totalHeapBytes / 1024).toFixed(0)} kB`,
    ];
    if (this.lastSample) {
      const s = this.lastSample;
      const per = s.nPoints > 0 ? (s.timeToDisplayMs / s.nPoints) * 1000 : 0;
      out.push(
        `${s.dayKey}: ${s.nPoints} pts in ${s.timeToDisplayMs.toFixed(1)} ms` +
          ` (${per.toFixed(0)} us/pt${s.fromCache ? ", cached" : ""})`,
      );
    }
    return out;
  }

  private render(): void {
    if (this.element) this.element.textContent = this.lines().join("\n");
  }
}

/** Error banner: shows the latest error, stays up until cleared. */
export class ErrorBanner {
  message: string | null = null;

  constructor(bus: MessageBus, private element: HTMLElement | null = null) {
    bus.subscribe("error", ({ source, message }) => {
      this.message = `${source}: ${message}`;
      this.render();
    });
    bus.subscribe("error/cleared", () => {
      this.message = null;
      this.render();
    });
  }

  visible(): boolean {
    return this.message !== null;
  }

  private render(): void {
    if (!this.element) return;
    this.element.textContent = this.message ?? "";
    this.element.style.display = this.message ? "block" : "none";
  }
}

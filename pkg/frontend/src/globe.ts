// Globe view component: owns which datasets are on screen, keeps the
// legend range spanning exactly the displayed data, and rebuilds meshes
// when the projection changes. Talks to the rest of the app via the bus.

import type { MessageBus } from "./bus.js";
import { ENTRY_OVERHEAD_BYTES, pointBytes } from "./cache.js";
import type { DataSetCacheEntry } from "./cache.js";
import type { BackgroundSpec } from "./config.js";
import { ThreeSceneHost } from "./scene.js";
import type { Renderer, SceneMesh } from "./scene.js";
import { keyId, ViewKind } from "./types.js";
import type { ValueRange } from "./types.js";

export class GlobeView {
  readonly host: ThreeSceneHost;
  /** keyId -> entry currently in the scene. */
  private displayed = new Map<string, DataSetCacheEntry>();
  private range: ValueRange | null = null;

  constructor(private bus: MessageBus, renderer: Renderer | null = null) {
    this.host = new ThreeSceneHost(renderer);
    bus.subscribe("input/rotate", ({ dx, dy }) => this.host.rotate(dx, dy));
    bus.subscribe("input/zoom", ({ delta }) => this.host.zoomBy(delta));
  }

  currentView(): ViewKind {
    return this.host.currentView();
  }

  legendRange(): ValueRange | null {
    return this.range;
  }

  displayedCount(): number {
    return this.displayed.size;
  }

  totalDisplayedPoints(): number {
    let total = 0;
    for (const entry of this.displayed.values()) total += entry.points.n;
    return total;
  }

  displayedKeyIds(): string[] {
    return [...this.displayed.keys()].sort();
  }

  isDisplayed(id: string): boolean {
    return this.displayed.has(id);
  }

  /**
   * Put a dataset on screen. Builds (or reuses) the mesh for the active
   * view, widens the legend range to cover the new values and re-colours
   * older meshes when the range actually grew.
   */
  display(entry: DataSetCacheEntry): void {
    const id = keyId(entry.key);
    if (this.displayed.has(id) || entry.points.n === 0) return;

    const view = this.host.currentView();
    const widened = widen(this.range, entry.points.value);
    const rangeGrew =
      this.range === null ||
      widened.min < this.range.min ||
      widened.max > this.range.max;
    this.range = widened;

    if (rangeGrew) this.recolorDisplayed();

    if (entry.mesh === null || entry.meshView !== view) {
      entry.mesh?.dispose();
      const mesh = this.host.buildMesh(entry.points, view, widened);
      entry.mesh = mesh;
      entry.meshView = view;
      entry.byteEstimate = pointBytes(entry.points) + mesh.byteSize + ENTRY_OVERHEAD_BYTES;
    } else if (rangeGrew) {
      this.host.recolorMesh(entry.mesh as SceneMesh, entry.points.value, widened);
    }
    this.host.addMesh(entry.mesh as SceneMesh);
    this.displayed.set(id, entry);
    this.publishLegend();
  }

  /** Remove everything from the scene; cached entries keep their meshes. */
  clear(): void {
    for (const entry of this.displayed.values()) {
      if (entry.mesh) this.host.removeMesh(entry.mesh as SceneMesh);
    }
    this.displayed.clear();
    this.range = null;
    this.publishLegend();
  }

  /** Re-project every displayed dataset; no network, arrays come from cache. */
  switchView(view: ViewKind): void {
    if (view === this.host.currentView()) return;
    for (const entry of this.displayed.values()) {
      if (entry.mesh) this.host.removeMesh(entry.mesh as SceneMesh);
    }
    this.host.setView(view);
    for (const entry of this.displayed.values()) {
      entry.mesh?.dispose();
      const mesh = this.host.buildMesh(entry.points, view, this.range as ValueRange);
      entry.mesh = mesh;
      entry.meshView = view;
      entry.byteEstimate = pointBytes(entry.points) + mesh.byteSize + ENTRY_OVERHEAD_BYTES;
      this.host.addMesh(mesh);
    }
    this.bus.publish("view/switched", { view });
  }

  setBackground(spec: BackgroundSpec): void {
    this.host.setBackground(spec);
    this.bus.publish("background/set", { id: spec.id });
  }

  frame(): void {
    this.host.renderFrame();
  }

  private recolorDisplayed(): void {
    const range = this.range as ValueRange;
    for (const entry of this.displayed.values()) {
      if (entry.mesh && entry.meshView === this.host.currentView()) {
        this.host.recolorMesh(entry.mesh as SceneMesh, entry.points.value, range);
      }
    }
  }

  private publishLegend(): void {
    this.bus.publish("legend/updated", {
      range: this.range,
      label: "cloud top / km",
    });
  }
}

function widen(range: ValueRange | null, values: Float32Array): ValueRange {
  let min = range?.min ?? Infinity;
  let max = range?.max ?? -Infinity;
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    if (v < min) min = v;
    if (v > max) max = v;
  }
  return { min, max };
}

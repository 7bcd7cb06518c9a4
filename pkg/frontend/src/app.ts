// Application controller: wires the data source, the cache, the globe view
// and the instrumentation together. All user-facing operations enter here.

import type { MessageBus } from "./bus.js";
import { DataSetCache } from "./cache.js";
import type { DataSetCacheEntry } from "./cache.js";
import type { AppConfig, BackgroundSpec } from "./config.js";
import { decodeCloudtop, decodeOrbit } from "./data-source.js";
import type { DataSource } from "./data-source.js";
import { GlobeView } from "./globe.js";
import { browserHeapBytes, Instrumentation } from "./instrumentation.js";
import type { Renderer } from "./scene.js";
import { criteriaFingerprint, FetchMode, keyId, ViewKind } from "./types.js";
import type {
  CloudCriteria,
  DataSetKey,
  DataSetKind,
  InstrumentationSample,
  RawArrival,
} from "./types.js";

/** Schedules a one-shot frame callback; requestAnimationFrame in browsers. */
export type FrameScheduler = (callback: () => void) => void;

export interface AppOptions {
  bus: MessageBus;
  config: AppConfig;
  source: DataSource;
  renderer?: Renderer | null;
  frameScheduler?: FrameScheduler;
  now?: () => number;
}

export interface FetchSummary {
  displayed: number;
  fromCache: number;
  failed: number;
}

export class GlobeApp {
  readonly cache = new DataSetCache();
  readonly instrumentation: Instrumentation;
  readonly view: GlobeView;
  private bus: MessageBus;
  private source: DataSource;
  private config: AppConfig;
  private now: () => number;
  private scheduler: FrameScheduler;
  private frameQueued = false;
  private frameWaiters: Array<() => void> = [];

  constructor(opts: AppOptions) {
    this.bus = opts.bus;
    this.config = opts.config;
    this.source = opts.source;
    this.now = opts.now ?? (() => performance.now());
    this.scheduler = opts.frameScheduler ?? ((cb) => setTimeout(cb, 0));
    this.instrumentation = new Instrumentation(this.bus);
    this.view = new GlobeView(this.bus, opts.renderer ?? null);
    const background = this.config.textures[0];
    if (background) this.view.setBackground(background);
  }

  dataSource(): DataSource {
    return this.source;
  }

  /** One animation frame: draw the scene, feed the FPS counter, release
   * anything waiting for "my mesh reached the screen". */
  frame(nowMs: number = this.now()): void {
    this.frameQueued = false;
    this.view.frame();
    this.instrumentation.frame(nowMs);
    this.instrumentation.publishFps();
    const waiters = this.frameWaiters;
    this.frameWaiters = [];
    for (const resolve of waiters) resolve();
  }

  /**
   * Fetch and display a range of days. SET_BY_SET walks the days one
   * request at a time; SIMULTANEOUS issues everything at once and displays
   * each day as it arrives. Failures raise the error banner but never
   * abort the remaining days, and nothing here blocks input handling.
   */
  async fetchRange(
    experiment: string,
    days: string[],
    criteria: CloudCriteria,
    mode: FetchMode,
  ): Promise<FetchSummary> {
    const summary: FetchSummary = { displayed: 0, fromCache: 0, failed: 0 };
    const one = async (day: string): Promise<void> => {
      try {
        const cached = await this.displayDay(experiment, day, criteria);
        summary.displayed += 1;
        if (cached) summary.fromCache += 1;
      } catch (err) {
        summary.failed += 1;
        this.bus.publish("error", {
          source: this.source.origin,
          message: (err as Error).message,
        });
      }
    };
    if (mode === FetchMode.SET_BY_SET) {
      for (const day of days) await one(day);
    } else {
      await Promise.all(days.map(one));
    }
    return summary;
  }

  /** Fetch and display one orbit path; same cache and timing rules. */
  async displayOrbit(experiment: string, day: string): Promise<void> {
    const key: DataSetKey = { experiment, day, fingerprint: "orbit" };
    const hit = this.cache.get(key);
    if (hit) {
      await this.redisplay(hit);
      return;
    }
    const arrival = await this.source.fetchOrbit(experiment, day);
    await this.displayArrival(key, arrival, "orbit");
  }

  /** Returns true when the day came from the cache. */
  private async displayDay(
    experiment: string,
    day: string,
    criteria: CloudCriteria,
  ): Promise<boolean> {
    const key: DataSetKey = {
      experiment,
      day,
      fingerprint: criteriaFingerprint(criteria),
    };
    const hit = this.cache.get(key);
    if (hit) {
      await this.redisplay(hit);
      return true;
    }
    const arrival = await this.source.fetchCloudtop(experiment, day, criteria);
    await this.displayArrival(key, arrival, "cloudtop");
    return false;
  }

  /**
   * The timed display path: decode the body, build the mesh, put it in the
   * scene and wait for the first frame that contains it. The clock starts
   * at data arrival, so network time is excluded by construction.
   */
  private async displayArrival(
    key: DataSetKey,
    arrival: RawArrival,
    kind: DataSetKind,
  ): Promise<void> {
    const heapBefore = browserHeapBytes();
    const started = this.now();
    const { points, metaCount } =
      kind === "cloudtop" ? decodeCloudtop(arrival.text) : decodeOrbit(arrival.text);
    if (points.n !== metaCount) {
      this.bus.publish("error", {
        source: this.source.origin,
        message: `payload count ${points.n} != meta.count ${metaCount}`,
      });
    }

    const entry = this.cache.store(key, points, null, null, 0);
    if (points.n > 0) {
      this.view.display(entry);
      await this.nextFrame();
    }
    const elapsed = this.now() - started;
    entry.initialDisplayMs = elapsed;

    const heapAfter = browserHeapBytes();
    const heapDelta =
      heapBefore !== null && heapAfter !== null
        ? heapAfter - heapBefore
        : entry.byteEstimate;
    this.record(key, points.n, elapsed, heapDelta, false);
  }

  /** Cached re-display: no network, reuse the mesh when the view matches. */
  private async redisplay(entry: DataSetCacheEntry): Promise<void> {
    const started = this.now();
    if (entry.points.n > 0 && !this.view.isDisplayed(keyId(entry.key))) {
      this.view.display(entry);
      await this.nextFrame();
    }
    this.record(entry.key, entry.points.n, this.now() - started, 0, true);
  }

  switchView(view: ViewKind): void {
    this.view.switchView(view);
    this.requestFrame();
  }

  setBackground(id: string): void {
    const spec = this.config.textures.find((t) => t.id === id);
    if (!spec) {
      this.bus.publish("error", { source: "config", message: `unknown background '${id}'` });
      return;
    }
    this.view.setBackground(spec);
    this.requestFrame();
  }

  backgrounds(): BackgroundSpec[] {
    return this.config.textures;
  }

  /** Take every dataset off the screen; the cache keeps the data. */
  clearScene(): void {
    const keys = [...this.view.displayedKeyIds()];
    this.view.clear();
    this.bus.publish("dataset/cleared", {
      keys: keys.map((id) => {
        const [experiment, day, ...rest] = id.split("/");
        return { experiment, day, fingerprint: rest.join("/") };
      }),
    });
    this.requestFrame();
  }

  private record(
    key: DataSetKey,
    nPoints: number,
    elapsedMs: number,
    heapDeltaBytes: number,
    fromCache: boolean,
  ): void {
    const sample: InstrumentationSample = {
      dayKey: keyId(key),
      nPoints,
      timeToDisplayMs: elapsedMs,
      heapDeltaBytes,
      fps: this.instrumentation.fpsCounter.current(),
      fromCache,
    };
    this.instrumentation.record(sample);
    this.bus.publish("dataset/displayed", { key, nPoints, fromCache });
  }

  private nextFrame(): Promise<void> {
    return new Promise((resolve) => {
      this.frameWaiters.push(resolve);
      this.requestFrame();
    });
  }

  private requestFrame(): void {
    if (this.frameQueued) return;
    this.frameQueued = true;
    this.scheduler(() => this.frame());
  }
}

import { describe, expect, it } from "vitest";
import { colorForValue } from "../src/color.js";
import { RestDataSource, defaultTransport } from "../src/data-source.js";
import type { Transport } from "../src/data-source.js";
import { ErrorBanner, InstrumentationPanel, LegendPanel } from "../src/panels.js";
import type { SceneMesh } from "../src/scene.js";
import { criteriaFingerprint, FetchMode, ViewKind } from "../src/types.js";
import type { CloudCriteria, DataSetKey } from "../src/types.js";
import { cloudtopBody } from "./helpers/fixtures.js";
import { isoDays, makeTestApp } from "./helpers/harness.js";

const CRITERIA: CloudCriteria = {
  observable: "ci",
  cmp: "le",
  threshold: 1.8,
  altMinKm: 0,
  altMaxKm: 30,
};

function dayKey(day: string): DataSetKey {
  return { experiment: "mipas", day, fingerprint: criteriaFingerprint(CRITERIA) };
}

interface FakeBackend {
  transport: Transport;
  log: string[];
  maxInflight: number;
}

/** In-process backend: day -> body, with optional per-day delays. */
function fakeBackend(
  bodyFor: (url: string) => string,
  delayFor: (url: string) => number = () => 0,
): FakeBackend {
  const backend: FakeBackend = { log: [], maxInflight: 0, transport: null as unknown as Transport };
  let inflight = 0;
  backend.transport = (url: string) =>
    new Promise<string>((resolve) => {
      backend.log.push(url);
      inflight += 1;
      if (inflight > backend.maxInflight) backend.maxInflight = inflight;
      setTimeout(() => {
        inflight -= 1;
        resolve(bodyFor(url));
      }, delayFor(url));
    });
  return backend;
}

function daySize(url: string): number {
  // deterministic but uneven day sizes
  const match = url.match(/day=\d{4}-\d{2}-(\d{2})/);
  const dayNum = match ? Number(match[1]) : 1;
  return 50 + dayNum * 13;
}

function makeBackendApp(delayFor: (url: string) => number = () => 0) {
  const backend = fakeBackend((url) => cloudtopBody(daySize(url)), delayFor);
  const built = makeTestApp(new RestDataSource("http://test", backend.transport));
  return { ...built, backend };
}

function positionsOf(mesh: SceneMesh): Float32Array {
  const object = mesh.object as unknown as {
    geometry: { getAttribute(name: string): { array: Float32Array } };
  };
  return object.geometry.getAttribute("position").array;
}

describe("fetch modes", () => {
  it("a one-day range issues one request in either mode", async () => {
    for (const mode of [FetchMode.SET_BY_SET, FetchMode.SIMULTANEOUS]) {
      const { app, backend } = makeBackendApp();
      await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, mode);
      expect(backend.log.length).toBe(1);
      expect(app.view.displayedCount()).toBe(1);
    }
  });

  it("SET_BY_SET issues one request at a time, displaying as it goes", async () => {
    const { app, backend } = makeBackendApp(() => 10);
    const days = isoDays("2002-07-01", 5);
    await app.fetchRange("mipas", days, CRITERIA, FetchMode.SET_BY_SET);

    expect(backend.log.length).toBe(5);
    expect(backend.maxInflight).toBe(1);
    expect(app.view.displayedCount()).toBe(5);
  });

  it("SIMULTANEOUS issues all requests concurrently", async () => {
    const { app, backend } = makeBackendApp(() => 25);
    const days = isoDays("2002-07-01", 5);
    await app.fetchRange("mipas", days, CRITERIA, FetchMode.SIMULTANEOUS);

    expect(backend.log.length).toBe(5);
    expect(backend.maxInflight).toBe(5);
    expect(app.view.displayedCount()).toBe(5);
  });

  it("a cached day re-selected issues zero requests", async () => {
    const { app, backend } = makeBackendApp();
    await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    expect(backend.log.length).toBe(1);

    const summary = await app.fetchRange(
      "mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET,
    );
    expect(backend.log.length).toBe(1);
    expect(summary.fromCache).toBe(1);
  });

  it("changed criteria are a different dataset and do refetch", async () => {
    const { app, backend } = makeBackendApp();
    await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    await app.fetchRange(
      "mipas", ["2002-07-01"], { ...CRITERIA, threshold: 2.5 }, FetchMode.SET_BY_SET,
    );
    expect(backend.log.length).toBe(2);
    expect(app.view.displayedCount()).toBe(2);
  });

  it("a failing day raises the banner but the rest still display", async () => {
    const backend = fakeBackend((url) =>
      url.includes("2002-07-02") ? "not json at all" : cloudtopBody(daySize(url)),
    );
    const { app, bus } = makeTestApp(new RestDataSource("http://test", backend.transport));
    const banner = new ErrorBanner(bus);

    const summary = await app.fetchRange(
      "mipas", isoDays("2002-07-01", 3), CRITERIA, FetchMode.SET_BY_SET,
    );

    expect(summary.displayed).toBe(2);
    expect(summary.failed).toBe(1);
    expect(banner.visible()).toBe(true);
    expect(banner.message).toContain("http://test");
    expect(app.view.displayedCount()).toBe(2);

    // the app stays alive: the failed day can be retried
    const retry = await app.fetchRange(
      "mipas", ["2002-07-03"], CRITERIA, FetchMode.SET_BY_SET,
    );
    expect(retry.fromCache).toBe(1);
  });
});

describe("display semantics", () => {
  it("zero points: no mesh, legend unchanged, sample recorded", async () => {
    const backend = fakeBackend((url) =>
      url.includes("2002-07-02") ? cloudtopBody(0) : cloudtopBody(10),
    );
    const { app } = makeTestApp(new RestDataSource("http://test", backend.transport));

    await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    const rangeBefore = app.view.legendRange();
    expect(rangeBefore).not.toBeNull();

    await app.fetchRange("mipas", ["2002-07-02"], CRITERIA, FetchMode.SET_BY_SET);
    expect(app.view.displayedCount()).toBe(1);
    expect(app.view.legendRange()).toEqual(rangeBefore);
    const last = app.instrumentation.samples.at(-1)!;
    expect(last.nPoints).toBe(0);
  });

  it("days add to the scene instead of replacing it", async () => {
    const { app } = makeBackendApp();
    await app.fetchRange("mipas", isoDays("2002-07-01", 2), CRITERIA, FetchMode.SET_BY_SET);

    expect(app.view.displayedCount()).toBe(2);
    expect(app.view.totalDisplayedPoints()).toBe(daySize("day=2002-07-01") + daySize("day=2002-07-02"));
  });

  it("each sample's point count equals the envelope's meta.count", async () => {
    const { app } = makeBackendApp();
    await app.fetchRange("mipas", isoDays("2002-07-01", 3), CRITERIA, FetchMode.SET_BY_SET);

    for (const sample of app.instrumentation.samples) {
      const day = sample.dayKey.split("/")[1];
      expect(sample.nPoints).toBe(daySize(`day=${day}`));
    }
  });

  it("instrumentation totals agree with the scene", async () => {
    const { app, bus } = makeBackendApp();
    const panel = new InstrumentationPanel(bus);
    await app.fetchRange("mipas", isoDays("2002-07-01", 4), CRITERIA, FetchMode.SIMULTANEOUS);

    expect(app.instrumentation.totalPoints()).toBe(app.view.totalDisplayedPoints());
    expect(panel.totalPoints).toBe(app.view.totalDisplayedPoints());
  });
});

describe("view operations", () => {
  it("switching with an empty scene does not throw", () => {
    const { app } = makeBackendApp();
    expect(() => app.switchView(ViewKind.PLANE)).not.toThrow();
    expect(() => app.switchView(ViewKind.POLAR)).not.toThrow();
    expect(app.view.currentView()).toBe(ViewKind.POLAR);
  });

  it("switching with data preserves counts and issues no requests", async () => {
    const { app, backend } = makeBackendApp();
    await app.fetchRange("mipas", isoDays("2002-07-01", 3), CRITERIA, FetchMode.SET_BY_SET);
    const pointsBefore = app.view.totalDisplayedPoints();
    const requestsBefore = backend.log.length;

    app.switchView(ViewKind.PLANE);
    expect(app.view.totalDisplayedPoints()).toBe(pointsBefore);
    expect(app.view.displayedCount()).toBe(3);
    expect(backend.log.length).toBe(requestsBefore);

    app.switchView(ViewKind.POLAR);
    expect(app.view.totalDisplayedPoints()).toBe(pointsBefore);
    expect(backend.log.length).toBe(requestsBefore);
  });

  it("meshes are rebuilt for the new projection from cached arrays", async () => {
    const { app } = makeBackendApp();
    await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    const entry = app.cache.get(dayKey("2002-07-01"))!;
    const sphereMesh = entry.mesh as SceneMesh;
    const spherePositions = Array.from(positionsOf(sphereMesh));

    app.switchView(ViewKind.PLANE);
    const planeMesh = entry.mesh as SceneMesh;
    expect(planeMesh).not.toBe(sphereMesh);
    expect(entry.meshView).toBe(ViewKind.PLANE);
    expect(Array.from(positionsOf(planeMesh))).not.toEqual(spherePositions);
  });

  it("background changes leave datasets untouched", async () => {
    const { app } = makeBackendApp();
    await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    const entry = app.cache.get(dayKey("2002-07-01"))!;
    const mesh = entry.mesh;

    app.setBackground("ocean");
    expect(app.cache.get(dayKey("2002-07-01"))!.mesh).toBe(mesh);
    expect(app.view.displayedCount()).toBe(1);
  });

  it("an unknown background raises the banner, not an exception", () => {
    const { app, bus } = makeBackendApp();
    const banner = new ErrorBanner(bus);
    app.setBackground("nope");
    expect(banner.visible()).toBe(true);
  });

  it("rotate and zoom arrive via bus messages", () => {
    const { app, bus } = makeBackendApp();
    bus.publish("input/rotate", { dx: 0.5, dy: 0.25 });
    bus.publish("input/zoom", { delta: Math.log(2) });
    expect(app.view.host.viewState.rotationY).toBeCloseTo(0.5, 10);
    expect(app.view.host.viewState.rotationX).toBeCloseTo(0.25, 10);
    expect(app.view.host.viewState.zoom).toBeCloseTo(2, 10);
  });
});

describe("cache round trip", () => {
  it("display, clear, re-display: identical arrays, zero requests", async () => {
    const { app, backend } = makeBackendApp();
    await app.fetchRange("mipas", isoDays("2002-07-01", 2), CRITERIA, FetchMode.SET_BY_SET);
    const entry = app.cache.get(dayKey("2002-07-01"))!;
    const latBefore = Float64Array.from(entry.points.lat);
    const meshBefore = entry.mesh;
    const requestsBefore = backend.log.length;

    app.clearScene();
    expect(app.view.displayedCount()).toBe(0);
    expect(app.view.legendRange()).toBeNull();

    await app.fetchRange("mipas", isoDays("2002-07-01", 2), CRITERIA, FetchMode.SET_BY_SET);
    expect(backend.log.length).toBe(requestsBefore);
    expect(app.view.displayedCount()).toBe(2);

    const after = app.cache.get(dayKey("2002-07-01"))!;
    expect(after.points.lat).toEqual(latBefore);
    // same view, so the very same mesh is reused
    expect(after.mesh).toBe(meshBefore);
  });

  it("re-display after a view switch rebuilds offline", async () => {
    const { app, backend } = makeBackendApp();
    await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    app.clearScene();
    app.switchView(ViewKind.POLAR);

    await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    expect(backend.log.length).toBe(1);
    expect(app.cache.get(dayKey("2002-07-01"))!.meshView).toBe(ViewKind.POLAR);
  });
});

describe("legend synchronisation", () => {
  it("every rendered colour is the legend mapping of its value", async () => {
    const { app, bus } = makeBackendApp();
    const legend = new LegendPanel(bus);
    // two unequal days so the union range grows and forces a recolor
    await app.fetchRange("mipas", isoDays("2002-07-01", 2), CRITERIA, FetchMode.SET_BY_SET);

    const range = app.view.legendRange()!;
    expect(legend.range).toEqual(range);

    for (const day of isoDays("2002-07-01", 2)) {
      const entry = app.cache.get(dayKey(day))!;
      const mesh = entry.mesh as SceneMesh;
      // sample a handful of points spread through the set
      for (let s = 0; s < 25; s++) {
        const i = Math.floor((s / 25) * entry.points.n);
        const expected = colorForValue(entry.points.value[i], range);
        const base = i * mesh.verticesPerPoint * 3;
        expect(mesh.colors[base]).toBeCloseTo(expected.r, 5);
        expect(mesh.colors[base + 1]).toBeCloseTo(expected.g, 5);
        expect(mesh.colors[base + 2]).toBeCloseTo(expected.b, 5);
      }
    }
  });

  it("legend range spans exactly the displayed values", async () => {
    const { app } = makeBackendApp();
    await app.fetchRange("mipas", isoDays("2002-07-01", 3), CRITERIA, FetchMode.SIMULTANEOUS);

    let min = Infinity;
    let max = -Infinity;
    for (const day of isoDays("2002-07-01", 3)) {
      const entry = app.cache.get(dayKey(day))!;
      for (const v of entry.points.value) {
        min = Math.min(min, v);
        max = Math.max(max, v);
      }
    }
    expect(app.view.legendRange()).toEqual({ min, max });
  });
});

describe("arrival order independence", () => {
  it("the final scene does not depend on response order", async () => {
    const days = isoDays("2002-07-01", 5);
    // ascending delays vs descending delays
    const forward = makeBackendApp((url) => daySize(url) % 40);
    const reverse = makeBackendApp((url) => 40 - (daySize(url) % 40));

    await forward.app.fetchRange("mipas", days, CRITERIA, FetchMode.SIMULTANEOUS);
    await reverse.app.fetchRange("mipas", days, CRITERIA, FetchMode.SIMULTANEOUS);

    expect(forward.app.view.displayedKeyIds()).toEqual(reverse.app.view.displayedKeyIds());
    expect(forward.app.view.totalDisplayedPoints()).toBe(reverse.app.view.totalDisplayedPoints());
    expect(forward.app.view.legendRange()).toEqual(reverse.app.view.legendRange());

    // colours settled to the same union range in both runs
    for (const day of days) {
      const meshA = forward.app.cache.get(dayKey(day))!.mesh as SceneMesh;
      const meshB = reverse.app.cache.get(dayKey(day))!.mesh as SceneMesh;
      expect(meshA.colors).toEqual(meshB.colors);
    }
  });
});

describe("orbit display", () => {
  it("fetches, displays and caches an orbital path", async () => {
    const orbitBody = JSON.stringify({
      data: Array.from({ length: 60 }, (_, i) => ({
        time: `2002-07-01T00:${String(i).padStart(2, "0")}:00.000Z`,
        lat: -60 + i * 2,
        lon: ((i * 24) % 360) - 180,
        orbit: 1803,
      })),
      meta: { count: 60, elapsed_ms: 1, chunks: 1 },
    });
    const backend = fakeBackend(() => orbitBody);
    const { app } = makeTestApp(new RestDataSource("http://test", backend.transport));

    await app.displayOrbit("mipas", "2002-07-01");
    expect(app.view.displayedCount()).toBe(1);
    expect(app.view.totalDisplayedPoints()).toBe(60);
    expect(backend.log.length).toBe(1);
    expect(backend.log[0]).toContain("/orbit?day=2002-07-01");

    await app.displayOrbit("mipas", "2002-07-01");
    expect(backend.log.length).toBe(1);
  });
});

describe("failing server", () => {
  it("a bad url shows a banner and the app keeps working", async () => {
    const source = new RestDataSource("http://127.0.0.1:9", defaultTransport());
    const { app, bus } = makeTestApp(source);
    const banner = new ErrorBanner(bus);

    const summary = await app.fetchRange("mipas", ["2002-07-01"], CRITERIA, FetchMode.SET_BY_SET);
    expect(summary.failed).toBe(1);
    expect(banner.visible()).toBe(true);
    expect(banner.message).toContain("cannot reach");

    // still responsive afterwards
    expect(() => app.switchView(ViewKind.PLANE)).not.toThrow();
    bus.publish("error/cleared", {});
    expect(banner.visible()).toBe(false);
  });
});

import { describe, expect, it } from "vitest";
import { DataSetCache, ENTRY_OVERHEAD_BYTES, pointBytes } from "../src/cache.js";
import type { MeshHandle } from "../src/cache.js";
import { criteriaFingerprint } from "../src/types.js";
import type { CloudCriteria, DataSetKey, DrawablePoints } from "../src/types.js";

function makePoints(n: number): DrawablePoints {
  return {
    kind: "cloudtop",
    n,
    lat: new Float64Array(n),
    lon: new Float64Array(n),
    altitudeKm: new Float32Array(n),
    value: new Float32Array(n),
  };
}

function makeMesh(bytes: number): MeshHandle & { disposed: boolean } {
  const mesh = {
    pointCount: 0,
    byteSize: bytes,
    disposed: false,
    dispose() {
      mesh.disposed = true;
    },
  };
  return mesh;
}

const CRITERIA: CloudCriteria = {
  observable: "ci",
  cmp: "le",
  threshold: 1.8,
  altMinKm: 0,
  altMaxKm: 30,
};

function key(day: string, criteria: CloudCriteria = CRITERIA): DataSetKey {
  return { experiment: "mipas", day, fingerprint: criteriaFingerprint(criteria) };
}

describe("criteria fingerprint", () => {
  it("is stable for equal criteria", () => {
    expect(criteriaFingerprint({ ...CRITERIA })).toBe(criteriaFingerprint(CRITERIA));
  });

  it("changes with every field", () => {
    const base = criteriaFingerprint(CRITERIA);
    expect(criteriaFingerprint({ ...CRITERIA, observable: "o3" })).not.toBe(base);
    expect(criteriaFingerprint({ ...CRITERIA, cmp: "ge" })).not.toBe(base);
    expect(criteriaFingerprint({ ...CRITERIA, threshold: 1.9 })).not.toBe(base);
    expect(criteriaFingerprint({ ...CRITERIA, altMinKm: 1 })).not.toBe(base);
    expect(criteriaFingerprint({ ...CRITERIA, altMaxKm: 25 })).not.toBe(base);
  });
});

describe("dataset cache", () => {
  it("hit requires exact key equality", () => {
    const cache = new DataSetCache();
    cache.store(key("2002-07-01"), makePoints(3), null, null, 1);

    expect(cache.get(key("2002-07-01"))).toBeDefined();
    expect(cache.get(key("2002-07-02"))).toBeUndefined();
    expect(cache.get(key("2002-07-01", { ...CRITERIA, threshold: 2 }))).toBeUndefined();
    expect(
      cache.get({ experiment: "gome", day: "2002-07-01", fingerprint: criteriaFingerprint(CRITERIA) }),
    ).toBeUndefined();
  });

  it("returns the stored arrays themselves, not copies", () => {
    const cache = new DataSetCache();
    const points = makePoints(5);
    points.lat[2] = 42.5;
    cache.store(key("2002-07-01"), points, null, null, 1);

    const entry = cache.get(key("2002-07-01"));
    expect(entry!.points).toBe(points);
    expect(entry!.points.lat[2]).toBe(42.5);
  });

  it("byte estimate covers arrays, mesh and the fixed overhead", () => {
    const cache = new DataSetCache();
    const points = makePoints(100);
    const mesh = makeMesh(4800);
    const entry = cache.store(key("2002-07-01"), points, mesh, "SPHERE", 1);

    // 100 points: lat/lon 8 B each, altitude/value 4 B each
    expect(pointBytes(points)).toBe(100 * 24);
    expect(entry.byteEstimate).toBe(100 * 24 + 4800 + ENTRY_OVERHEAD_BYTES);
    expect(cache.totalByteEstimate()).toBe(entry.byteEstimate);
  });

  it("replaceMesh swaps the handle and re-totals the estimate", () => {
    const cache = new DataSetCache();
    const entry = cache.store(key("2002-07-01"), makePoints(10), makeMesh(100), "SPHERE", 1);
    cache.replaceMesh(entry, makeMesh(999), "PLANE");

    expect(entry.meshView).toBe("PLANE");
    expect(entry.byteEstimate).toBe(10 * 24 + 999 + ENTRY_OVERHEAD_BYTES);
  });

  it("clear disposes meshes and empties the map", () => {
    const cache = new DataSetCache();
    const mesh = makeMesh(10);
    cache.store(key("2002-07-01"), makePoints(1), mesh, "SPHERE", 1);
    cache.clear();

    expect(mesh.disposed).toBe(true);
    expect(cache.size()).toBe(0);
    expect(cache.totalByteEstimate()).toBe(0);
  });
});

// Client-side dataset cache. A hit requires exact key equality (experiment,
// day and criteria fingerprint) and re-displays without touching the network.

import type { DataSetKey, DrawablePoints } from "./types.js";
import { keyId } from "./types.js";

/** Opaque handle to whatever the scene layer built for this dataset. */
export interface MeshHandle {
  pointCount: number;
  /** Bytes held by the mesh's vertex buffers. */
  byteSize: number;
  dispose(): void;
}

export interface DataSetCacheEntry {
  key: DataSetKey;
  points: DrawablePoints;
  mesh: MeshHandle | null;
  /** View the cached mesh was built for; a different view forces a rebuild. */
  meshView: string | null;
  byteEstimate: number;
  /** Wall time of the first display, the baseline cached re-displays beat. */
  initialDisplayMs: number;
}

/** Fixed per-entry overhead charged on top of the raw arrays (object shells,
 * map slots, attribute wrappers). */
export const ENTRY_OVERHEAD_BYTES = 1024;

export function pointBytes(points: DrawablePoints): number {
  return (
    points.lat.byteLength +
    points.lon.byteLength +
    points.altitudeKm.byteLength +
    points.value.byteLength
  );
}

export class DataSetCache {
  private entries = new Map<string, DataSetCacheEntry>();

  get(key: DataSetKey): DataSetCacheEntry | undefined {
    return this.entries.get(keyId(key));
  }

  store(
    key: DataSetKey,
    points: DrawablePoints,
    mesh: MeshHandle | null,
    meshView: string | null,
    initialDisplayMs: number,
  ): DataSetCacheEntry {
    const entry: DataSetCacheEntry = {
      key,
      points,
      mesh,
      meshView,
      byteEstimate:
        pointBytes(points) + (mesh?.byteSize ?? 0) + ENTRY_OVERHEAD_BYTES,
      initialDisplayMs,
    };
    this.entries.set(keyId(key), entry);
    return entry;
  }

  /** Swap the mesh (after a view switch rebuild) and re-total the estimate. */
  replaceMesh(entry: DataSetCacheEntry, mesh: MeshHandle, meshView: string): void {
    entry.mesh = mesh;
    entry.meshView = meshView;
    entry.byteEstimate = pointBytes(entry.points) + mesh.byteSize + ENTRY_OVERHEAD_BYTES;
  }

  size(): number {
    return this.entries.size;
  }

  totalByteEstimate(): number {
    let total = 0;
    for (const entry of this.entries.values()) total += entry.byteEstimate;
    return total;
  }

  clear(): void {
    for (const entry of this.entries.values()) entry.mesh?.dispose();
    this.entries.clear();
  }
}

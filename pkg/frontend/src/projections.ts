// Geometry builders: project lat/lon/altitude columns into vertex arrays
// for each of the three views. Pure array math, no renderer involved.

import { ViewKind } from "./types.js";
import type { DrawablePoints } from "./types.js";

/** Globe radius in scene units; everything else is scaled relative to it. */
export const GLOBE_RADIUS = 1.0;

/** Scene units per kilometre of altitude, so a 30 km spike is 0.15 R. */
export const KM_TO_UNITS = 0.005;

const DEG = Math.PI / 180;

/** Base position of a point on the active view surface. */
export function projectBase(
  view: ViewKind,
  latDeg: number,
  lonDeg: number,
): [number, number, number] {
  const lat = latDeg * DEG;
  const lon = lonDeg * DEG;
  switch (view) {
    case ViewKind.SPHERE: {
      const c = Math.cos(lat);
      return [
        GLOBE_RADIUS * c * Math.cos(lon),
        GLOBE_RADIUS * Math.sin(lat),
        -GLOBE_RADIUS * c * Math.sin(lon),
      ];
    }
    case ViewKind.PLANE:
      // Equirectangular: x in [-2, 2], y in [-1, 1], spikes along +z.
      return [lonDeg / 90, latDeg / 90, 0];
    case ViewKind.POLAR: {
      // Azimuthal equidistant from the north pole; r in [0, 2].
      const r = (90 - latDeg) / 90;
      return [r * Math.cos(lon), r * Math.sin(lon), 0];
    }
  }
}

/** Unit direction along which a spike at this position grows. */
export function spikeDirection(
  view: ViewKind,
  latDeg: number,
  lonDeg: number,
): [number, number, number] {
  if (view === ViewKind.SPHERE) {
    const lat = latDeg * DEG;
    const lon = lonDeg * DEG;
    const c = Math.cos(lat);
    return [c * Math.cos(lon), Math.sin(lat), -c * Math.sin(lon)];
  }
  return [0, 0, 1];
}

export interface MeshArrays {
  /** xyz per vertex. */
  positions: Float32Array;
  verticesPerPoint: number;
}

/**
 * Build vertex positions for a dataset in the given view.
 *
 * Cloud-top sets become line segments from the surface to
 * altitude * KM_TO_UNITS above it (spike length encodes altitude).
 * Orbit sets become a connected path lifted slightly off the surface so
 * it never z-fights with the globe itself.
 */
export function buildMeshArrays(points: DrawablePoints, view: ViewKind): MeshArrays {
  if (points.kind === "cloudtop") {
    const positions = new Float32Array(points.n * 2 * 3);
    for (let i = 0; i < points.n; i++) {
      const lat = points.lat[i];
      const lon = points.lon[i];
      const base = projectBase(view, lat, lon);
      const dir = spikeDirection(view, lat, lon);
      const len = points.altitudeKm[i] * KM_TO_UNITS;
      const o = i * 6;
      positions[o] = base[0];
      positions[o + 1] = base[1];
      positions[o + 2] = base[2];
      positions[o + 3] = base[0] + dir[0] * len;
      positions[o + 4] = base[1] + dir[1] * len;
      positions[o + 5] = base[2] + dir[2] * len;
    }
    return { positions, verticesPerPoint: 2 };
  }

  const lift = 0.002;
  const positions = new Float32Array(points.n * 3);
  for (let i = 0; i < points.n; i++) {
    const lat = points.lat[i];
    const lon = points.lon[i];
    const base = projectBase(view, lat, lon);
    const dir = spikeDirection(view, lat, lon);
    const o = i * 3;
    positions[o] = base[0] + dir[0] * lift;
    positions[o + 1] = base[1] + dir[1] * lift;
    positions[o + 2] = base[2] + dir[2] * lift;
  }
  return { positions, verticesPerPoint: 1 };
}

// Shared domain types for the globe browser.

/** The three supported projections of the 3D view. */
export enum ViewKind {
  SPHERE = "SPHERE",
  PLANE = "PLANE",
  POLAR = "POLAR",
}

/** How a multi-day fetch is issued against the server. */
export enum FetchMode {
  SET_BY_SET = "SET_BY_SET",
  SIMULTANEOUS = "SIMULTANEOUS",
}

/** Cloud criteria as understood by the cloudtop endpoint. */
export interface CloudCriteria {
  observable: string;
  cmp: "le" | "ge";
  threshold: number;
  altMinKm: number;
  altMaxKm: number;
}

/** What a dataset holds: cloud-top spikes or an orbital path. */
export type DataSetKind = "cloudtop" | "orbit";

/**
 * Identity of one displayable dataset. Criteria are folded into a
 * canonical fingerprint string so cache hits require exact equality.
 */
export interface DataSetKey {
  experiment: string;
  day: string;
  fingerprint: string;
}

export function criteriaFingerprint(c: CloudCriteria): string {
  return `ci=${c.observable};${c.cmp};${c.threshold};${c.altMinKm};${c.altMaxKm}`;
}

export function keyId(key: DataSetKey): string {
  return `${key.experiment}/${key.day}/${key.fingerprint}`;
}

/**
 * Column-oriented point data decoded from a server payload, ready to be
 * projected into a mesh. Altitude drives spike length, value drives colour.
 */
export interface DrawablePoints {
  kind: DataSetKind;
  n: number;
  lat: Float64Array;
  lon: Float64Array;
  altitudeKm: Float32Array;
  value: Float32Array;
}

/** Inclusive value range used by the legend and the colour mapping. */
export interface ValueRange {
  min: number;
  max: number;
}

/** One per-display measurement recorded by the instrumentation service. */
export interface InstrumentationSample {
  dayKey: string;
  nPoints: number;
  /** Data-arrival to first frame containing the new mesh; network excluded. */
  timeToDisplayMs: number;
  heapDeltaBytes: number;
  fps: number;
  fromCache: boolean;
}

/** The standard response envelope returned by every data endpoint. */
export interface Envelope<T> {
  data: T[];
  meta: { count: number; elapsed_ms: number; chunks: number };
}

export interface CloudtopItem {
  record_id: number;
  time: string;
  lat: number;
  lon: number;
  cloud_top_km: number;
}

export interface OrbitItem {
  time: string;
  lat: number;
  lon: number;
  orbit: number;
}

export interface ExperimentItem {
  id: string;
  record_count: number;
  first_day: string;
  last_day: string;
}

export interface DayItem {
  day: string;
  count: number;
}

/** Raw server payload plus the moment it finished arriving. */
export interface RawArrival {
  text: string;
  arrivedAt: number;
}

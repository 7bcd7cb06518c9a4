// Data-source service: the only place that knows where point data comes
// from. The default source is the REST server; a local JSON document can
// be swapped in for offline use and testing. Both produce the same
// internal column format.

import type {
  CloudCriteria,
  CloudtopItem,
  DayItem,
  DrawablePoints,
  Envelope,
  ExperimentItem,
  OrbitItem,
  RawArrival,
} from "./types.js";

/** url -> body text; rejects on transport or HTTP-level failure. */
export type Transport = (url: string) => Promise<string>;

export class DataSourceError extends Error {
  constructor(message: string, readonly code: string = "TRANSPORT") {
    super(message);
  }
}

export interface DataSource {
  /** Human-readable origin, shown in error banners. */
  readonly origin: string;
  fetchExperiments(): Promise<ExperimentItem[]>;
  fetchDays(experiment: string, from: string, to: string): Promise<DayItem[]>;
  /** Returns the raw body; decoding happens on the display path. */
  fetchCloudtop(experiment: string, day: string, criteria: CloudCriteria): Promise<RawArrival>;
  fetchOrbit(experiment: string, day: string): Promise<RawArrival>;
  /** Number of requests issued so far; cache tests key off this. */
  requestCount(): number;
}

export function defaultTransport(fetchImpl: typeof fetch = fetch): Transport {
  return async (url: string) => {
    let response: Response;
    try {
      response = await fetchImpl(url);
    } catch (err) {
      throw new DataSourceError(`cannot reach ${url}: ${(err as Error).message}`);
    }
    const text = await response.text();
    if (!response.ok) {
      let message = `HTTP ${response.status}`;
      try {
        const body = JSON.parse(text) as { error?: { code?: string; message?: string } };
        if (body.error?.message) message = `${body.error.code}: ${body.error.message}`;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new DataSourceError(message, "HTTP");
    }
    return text;
  };
}

function parseEnvelope<T>(text: string, what: string): Envelope<T> {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new DataSourceError(`${what}: response is not JSON`, "DECODE");
  }
  const env = doc as Partial<Envelope<T>>;
  if (!Array.isArray(env.data) || typeof env.meta?.count !== "number") {
    throw new DataSourceError(`${what}: missing data/meta envelope`, "DECODE");
  }
  return env as Envelope<T>;
}

/**
 * Decode a cloudtop payload into drawable columns. Exposed separately so
 * the timing path can run it after arrival, network excluded.
 */
export function decodeCloudtop(text: string): { points: DrawablePoints; metaCount: number } {
  const env = parseEnvelope<CloudtopItem>(text, "cloudtop");
  const n = env.data.length;
  const points: DrawablePoints = {
    kind: "cloudtop",
    n,
    lat: new Float64Array(n),
    lon: new Float64Array(n),
    altitudeKm: new Float32Array(n),
    value: new Float32Array(n),
  };
  for (let i = 0; i < n; i++) {
    const item = env.data[i];
    points.lat[i] = item.lat;
    points.lon[i] = item.lon;
    points.altitudeKm[i] = item.cloud_top_km;
    points.value[i] = item.cloud_top_km;
  }
  return { points, metaCount: env.meta.count };
}

export function decodeOrbit(text: string): { points: DrawablePoints; metaCount: number } {
  const env = parseEnvelope<OrbitItem>(text, "orbit");
  const n = env.data.length;
  const points: DrawablePoints = {
    kind: "orbit",
    n,
    lat: new Float64Array(n),
    lon: new Float64Array(n),
    altitudeKm: new Float32Array(n),
    value: new Float32Array(n),
  };
  for (let i = 0; i < n; i++) {
    const item = env.data[i];
    points.lat[i] = item.lat;
    points.lon[i] = item.lon;
    points.value[i] = item.orbit;
  }
  return { points, metaCount: env.meta.count };
}

export class RestDataSource implements DataSource {
  readonly origin: string;
  private requests = 0;

  constructor(
    private baseUrl: string,
    private transport: Transport,
    private now: () => number = () => performance.now(),
  ) {
    this.origin = baseUrl;
  }

  private async get(path: string): Promise<string> {
    this.requests += 1;
    return this.transport(`${this.baseUrl}${path}`);
  }

  requestCount(): number {
    return this.requests;
  }

  async fetchExperiments(): Promise<ExperimentItem[]> {
    const text = await this.get("/api/v1/experiments");
    return parseEnvelope<ExperimentItem>(text, "experiments").data;
  }

  async fetchDays(experiment: string, from: string, to: string): Promise<DayItem[]> {
    const exp = encodeURIComponent(experiment);
    const text = await this.get(`/api/v1/experiments/${exp}/days?from=${from}&to=${to}`);
    return parseEnvelope<DayItem>(text, "days").data;
  }

  async fetchCloudtop(
    experiment: string,
    day: string,
    criteria: CloudCriteria,
  ): Promise<RawArrival> {
    const exp = encodeURIComponent(experiment);
    const query =
      `day=${day}&observable=${encodeURIComponent(criteria.observable)}` +
      `&cmp=${criteria.cmp}&threshold=${criteria.threshold}` +
      `&alt_min=${criteria.altMinKm}&alt_max=${criteria.altMaxKm}`;
    const text = await this.get(`/api/v1/experiments/${exp}/cloudtop?${query}`);
    return { text, arrivedAt: this.now() };
  }

  async fetchOrbit(experiment: string, day: string): Promise<RawArrival> {
    const exp = encodeURIComponent(experiment);
    const text = await this.get(`/api/v1/experiments/${exp}/orbit?day=${day}`);
    return { text, arrivedAt: this.now() };
  }
}

/**
 * Shape of the bundled sample document: pre-recorded envelope bodies keyed
 * by day. Criteria are ignored; the file contains what it contains.
 */
export interface LocalDocument {
  experiments: Envelope<ExperimentItem>;
  days: Record<string, Envelope<DayItem>>;
  cloudtop: Record<string, Envelope<CloudtopItem>>;
  orbit: Record<string, Envelope<OrbitItem>>;
}

export class LocalFileDataSource implements DataSource {
  readonly origin: string;
  private doc: Promise<LocalDocument> | null = null;
  private requests = 0;

  constructor(
    private url: string,
    private transport: Transport,
    private now: () => number = () => performance.now(),
  ) {
    this.origin = `local file ${url}`;
  }

  /** The file is fetched once; every later call is served from memory. */
  private load(): Promise<LocalDocument> {
    if (!this.doc) {
      this.requests += 1;
      this.doc = this.transport(this.url).then((text) => {
        try {
          return JSON.parse(text) as LocalDocument;
        } catch {
          throw new DataSourceError(`${this.origin}: not valid JSON`, "DECODE");
        }
      });
      this.doc.catch(() => {
        // allow a retry after a failed load
        this.doc = null;
      });
    }
    return this.doc;
  }

  requestCount(): number {
    return this.requests;
  }

  async fetchExperiments(): Promise<ExperimentItem[]> {
    return (await this.load()).experiments.data;
  }

  async fetchDays(experiment: string, from: string, to: string): Promise<DayItem[]> {
    const days = (await this.load()).days[experiment];
    if (!days) throw new DataSourceError(`${this.origin}: no days for '${experiment}'`, "MISSING");
    return days.data.filter((d) => d.day >= from && d.day <= to);
  }

  async fetchCloudtop(
    experiment: string,
    day: string,
    _criteria: CloudCriteria,
  ): Promise<RawArrival> {
    const env = (await this.load()).cloudtop[day];
    if (!env) throw new DataSourceError(`${this.origin}: no cloudtop data for ${day}`, "MISSING");
    return { text: JSON.stringify(env), arrivedAt: this.now() };
  }

  async fetchOrbit(experiment: string, day: string): Promise<RawArrival> {
    const env = (await this.load()).orbit[day];
    if (!env) throw new DataSourceError(`${this.origin}: no orbit data for ${day}`, "MISSING");
    return { text: JSON.stringify(env), arrivedAt: this.now() };
  }
}

// Shared fixtures: the bundled sample document plus small synthetic
// envelope builders for unit tests.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { LocalDocument } from "../../src/data-source.js";
import type { CloudtopItem, Envelope } from "../../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export const SAMPLE_PATH = join(here, "..", "..", "public", "sample-data.json");

export function loadSampleDocument(): LocalDocument {
  return JSON.parse(readFileSync(SAMPLE_PATH, "utf8")) as LocalDocument;
}

export function envelope<T>(data: T[]): Envelope<T> {
  return { data, meta: { count: data.length, elapsed_ms: 1, chunks: 1 } };
}

/** Deterministic cloud-top items spread over the globe. */
export function makeCloudtopItems(n: number, day = "2002-07-01"): CloudtopItem[] {
  const items: CloudtopItem[] = [];
  for (let i = 0; i < n; i++) {
    items.push({
      record_id: i,
      time: `${day}T00:00:${String(i % 60).padStart(2, "0")}.000Z`,
      lat: -80 + (160 * i) / Math.max(1, n - 1),
      lon: -180 + ((i * 47) % 360),
      cloud_top_km: 6 + (i % 25),
    });
  }
  return items;
}

export function cloudtopBody(n: number, day = "2002-07-01"): string {
  return JSON.stringify(envelope(makeCloudtopItems(n, day)));
}

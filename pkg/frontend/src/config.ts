// Configuration service: loads and validates the app config document.

import type { CloudCriteria } from "./types.js";

export interface BackgroundSpec {
  id: string;
  /** Two hex colours blended into the background; no image assets needed. */
  colors: [string, string];
}

export interface AppConfig {
  serverUrl: string;
  dataSource: "rest" | "local";
  /** Path of the bundled sample document used by the local source. */
  localFile: string;
  textures: BackgroundSpec[];
  defaultExperiment: string;
  defaultCriteria: CloudCriteria;
}

export const DEFAULT_CONFIG: AppConfig = {
  serverUrl: "",
  dataSource: "rest",
  localFile: "./sample-data.json",
  textures: [
    { id: "deep", colors: ["#060a18", "#0b1530"] },
    { id: "ocean", colors: ["#06263a", "#0d4a6e"] },
    { id: "slate", colors: ["#14161c", "#2a2e3a"] },
  ],
  defaultExperiment: "mipas",
  defaultCriteria: {
    observable: "ci",
    cmp: "le",
    threshold: 1.8,
    altMinKm: 0,
    altMaxKm: 30,
  },
};

export class ConfigError extends Error {}

function asString(doc: Record<string, unknown>, key: string, fallback: string): string {
  const v = doc[key];
  if (v === undefined) return fallback;
  if (typeof v !== "string") throw new ConfigError(`config key '${key}' must be a string`);
  return v;
}

/**
 * Parse a config document, filling gaps from DEFAULT_CONFIG. Unknown keys
 * are rejected so typos fail loudly instead of silently using defaults.
 */
export function parseConfig(text: string): AppConfig {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new ConfigError(`config is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ConfigError("config must be a JSON object");
  }
  const d = doc as Record<string, unknown>;
  const known = new Set([
    "serverUrl", "dataSource", "localFile", "textures",
    "defaultExperiment", "defaultCriteria",
  ]);
  for (const key of Object.keys(d)) {
    if (!known.has(key)) throw new ConfigError(`unknown config key '${key}'`);
  }

  const dataSource = asString(d, "dataSource", DEFAULT_CONFIG.dataSource);
  if (dataSource !== "rest" && dataSource !== "local") {
    throw new ConfigError(`dataSource must be 'rest' or 'local', got '${dataSource}'`);
  }

  let textures = DEFAULT_CONFIG.textures;
  if (d.textures !== undefined) {
    if (!Array.isArray(d.textures) || d.textures.length === 0) {
      throw new ConfigError("textures must be a non-empty array");
    }
    textures = d.textures.map((t, i) => {
      const spec = t as Partial<BackgroundSpec>;
      if (typeof spec.id !== "string" || !Array.isArray(spec.colors) || spec.colors.length !== 2) {
        throw new ConfigError(`textures[${i}] needs an id and a two-colour list`);
      }
      return { id: spec.id, colors: [String(spec.colors[0]), String(spec.colors[1])] as [string, string] };
    });
  }

  let criteria = DEFAULT_CONFIG.defaultCriteria;
  if (d.defaultCriteria !== undefined) {
    const c = d.defaultCriteria as Partial<CloudCriteria>;
    if (typeof c.observable !== "string" || (c.cmp !== "le" && c.cmp !== "ge")) {
      throw new ConfigError("defaultCriteria needs observable and cmp ('le' or 'ge')");
    }
    criteria = {
      observable: c.observable,
      cmp: c.cmp,
      threshold: Number(c.threshold ?? DEFAULT_CONFIG.defaultCriteria.threshold),
      altMinKm: Number(c.altMinKm ?? DEFAULT_CONFIG.defaultCriteria.altMinKm),
      altMaxKm: Number(c.altMaxKm ?? DEFAULT_CONFIG.defaultCriteria.altMaxKm),
    };
    if (!Number.isFinite(criteria.threshold)) {
      throw new ConfigError("defaultCriteria.threshold must be a finite number");
    }
  }

  return {
    serverUrl: asString(d, "serverUrl", DEFAULT_CONFIG.serverUrl).replace(/\/+$/, ""),
    dataSource,
    localFile: asString(d, "localFile", DEFAULT_CONFIG.localFile),
    textures,
    defaultExperiment: asString(d, "defaultExperiment", DEFAULT_CONFIG.defaultExperiment),
    defaultCriteria: criteria,
  };
}

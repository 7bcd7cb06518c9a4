// Browser entry point: builds the DOM wiring, loads the config document,
// constructs the app and runs the animation loop. Everything testable
// lives in the modules this file composes.

import * as THREE from "three";
import { GlobeApp } from "./app.js";
import { MessageBus } from "./bus.js";
import { DEFAULT_CONFIG, parseConfig } from "./config.js";
import type { AppConfig } from "./config.js";
import {
  defaultTransport,
  LocalFileDataSource,
  RestDataSource,
} from "./data-source.js";
import type { DataSource } from "./data-source.js";
import { ErrorBanner, InstrumentationPanel, LegendPanel } from "./panels.js";
import { FetchMode, ViewKind } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function loadConfig(): Promise<AppConfig> {
  try {
    const response = await fetch("./config.json");
    if (!response.ok) return DEFAULT_CONFIG;
    return parseConfig(await response.text());
  } catch {
    return DEFAULT_CONFIG;
  }
}

function makeSource(config: AppConfig): DataSource {
  const transport = defaultTransport();
  if (config.dataSource === "local") {
    return new LocalFileDataSource(config.localFile, transport);
  }
  // An empty serverUrl means "same origin as the page serving the bundle".
  return new RestDataSource(config.serverUrl, transport);
}

function wireControls(bus: MessageBus, canvas: HTMLCanvasElement): void {
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (event) => {
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
    canvas.setPointerCapture(event.pointerId);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!dragging) return;
    bus.publish("input/rotate", {
      dx: (event.clientX - lastX) * 0.005,
      dy: (event.clientY - lastY) * 0.005,
    });
    lastX = event.clientX;
    lastY = event.clientY;
  });
  canvas.addEventListener("pointerup", () => {
    dragging = false;
  });
  canvas.addEventListener(
    "wheel",
    (event) => {
      event.preventDefault();
      bus.publish("input/zoom", { delta: -event.deltaY * 0.001 });
    },
    { passive: false },
  );
}

function dayRange(from: string, to: string): string[] {
  const days: string[] = [];
  const cursor = new Date(`${from}T00:00:00Z`);
  const end = new Date(`${to}T00:00:00Z`);
  while (cursor <= end && days.length < 183) {
    days.push(cursor.toISOString().slice(0, 10));
    cursor.setUTCDate(cursor.getUTCDate() + 1);
  }
  return days;
}

window.addEventListener("DOMContentLoaded", async () => {
  const config = await loadConfig();
  const bus = new MessageBus();
  const canvas = el<HTMLCanvasElement>("globe-canvas");

  const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
  const app = new GlobeApp({
    bus,
    config,
    source: makeSource(config),
    renderer,
    frameScheduler: (cb) => requestAnimationFrame(cb),
  });

  new LegendPanel(bus, el<HTMLCanvasElement>("legend-canvas"));
  new InstrumentationPanel(
    bus,
    el("perf-panel"),
    app.instrumentation.heapIsMeasured,
  );
  new ErrorBanner(bus, el("error-banner"));
  wireControls(bus, canvas);

  const backgroundSelect = el<HTMLSelectElement>("background-select");
  for (const texture of app.backgrounds()) {
    const option = document.createElement("option");
    option.value = texture.id;
    option.textContent = texture.id;
    backgroundSelect.appendChild(option);
  }
  backgroundSelect.addEventListener("change", () => {
    app.setBackground(backgroundSelect.value);
    document.body.style.background = `linear-gradient(${
      app.backgrounds().find((t) => t.id === backgroundSelect.value)?.colors.join(", ") ?? "#000"
    })`;
  });

  for (const view of [ViewKind.SPHERE, ViewKind.PLANE, ViewKind.POLAR]) {
    el(`view-${view.toLowerCase()}`).addEventListener("click", () => app.switchView(view));
  }

  const experimentInput = el<HTMLInputElement>("experiment-input");
  experimentInput.value = config.defaultExperiment;
  const fromInput = el<HTMLInputElement>("from-input");
  const toInput = el<HTMLInputElement>("to-input");
  const thresholdInput = el<HTMLInputElement>("threshold-input");
  thresholdInput.value = String(config.defaultCriteria.threshold);
  const modeSelect = el<HTMLSelectElement>("mode-select");

  // Pre-fill the day pickers with whatever the source actually has.
  try {
    const experiments = await app.dataSource().fetchExperiments();
    const exp = experiments.find((e) => e.id === config.defaultExperiment) ?? experiments[0];
    if (exp) {
      experimentInput.value = exp.id;
      fromInput.value = exp.first_day;
      toInput.value = exp.first_day;
    }
  } catch (err) {
    bus.publish("error", {
      source: app.dataSource().origin,
      message: (err as Error).message,
    });
  }

  el("fetch-button").addEventListener("click", () => {
    bus.publish("error/cleared", {});
    const criteria = {
      ...config.defaultCriteria,
      threshold: Number(thresholdInput.value),
    };
    const mode =
      modeSelect.value === "simultaneous" ? FetchMode.SIMULTANEOUS : FetchMode.SET_BY_SET;
    void app.fetchRange(
      experimentInput.value.trim(),
      dayRange(fromInput.value, toInput.value),
      criteria,
      mode,
    );
  });
  el("orbit-button").addEventListener("click", () => {
    bus.publish("error/cleared", {});
    void app.displayOrbit(experimentInput.value.trim(), fromInput.value).catch((err) => {
      bus.publish("error", {
        source: app.dataSource().origin,
        message: (err as Error).message,
      });
    });
  });
  el("clear-button").addEventListener("click", () => app.clearScene());

  const resize = () => {
    const width = canvas.clientWidth;
    const height = canvas.clientHeight;
    renderer.setSize(width, height, false);
    const camera = app.view.host.activeCamera() as THREE.PerspectiveCamera;
    if (camera.isPerspectiveCamera) {
      camera.aspect = width / height;
      camera.updateProjectionMatrix();
    }
  };
  window.addEventListener("resize", resize);
  resize();

  const loop = (now: number) => {
    app.frame(now);
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
});

// Thin wrapper around the three.js scene graph: dataset meshes, the view
// surface helpers, cameras and the background. Rendering goes through an
// injected renderer so everything here also runs headless.

import * as THREE from "three";
import type { BackgroundSpec } from "./config.js";
import type { MeshHandle } from "./cache.js";
import { writeColors } from "./color.js";
import { buildMeshArrays, GLOBE_RADIUS } from "./projections.js";
import { ViewKind } from "./types.js";
import type { DrawablePoints, ValueRange } from "./types.js";

/** The part of a WebGL renderer the scene host relies on. */
export interface Renderer {
  render(scene: THREE.Scene, camera: THREE.Camera): void;
}

/** Dataset mesh handle with the scene-level bits attached. */
export interface SceneMesh extends MeshHandle {
  object: THREE.Object3D;
  colors: Float32Array;
  verticesPerPoint: number;
}

export interface ViewState {
  rotationX: number;
  rotationY: number;
  zoom: number;
}

const MIN_ZOOM = 0.3;
const MAX_ZOOM = 8;

export class ThreeSceneHost {
  readonly scene = new THREE.Scene();
  /** Data meshes live under one group so view rotation is a single matrix. */
  readonly dataRoot = new THREE.Group();
  private surface: THREE.Object3D | null = null;
  private surfaceMaterial = new THREE.MeshBasicMaterial({ color: 0x15335a });
  private perspective = new THREE.PerspectiveCamera(45, 4 / 3, 0.01, 100);
  private orthographic = new THREE.OrthographicCamera(-2.4, 2.4, 1.8, -1.8, 0.01, 100);
  private view: ViewKind = ViewKind.SPHERE;
  readonly viewState: ViewState = { rotationX: 0, rotationY: 0, zoom: 1 };

  constructor(private renderer: Renderer | null = null) {
    this.scene.add(this.dataRoot);
    this.perspective.position.set(0, 0, 3.2);
    this.orthographic.position.set(0, 0, 5);
    this.setView(ViewKind.SPHERE);
  }

  setRenderer(renderer: Renderer | null): void {
    this.renderer = renderer;
  }

  activeCamera(): THREE.Camera {
    return this.view === ViewKind.SPHERE ? this.perspective : this.orthographic;
  }

  currentView(): ViewKind {
    return this.view;
  }

  /** Swap the surface helper that gives the points spatial context. */
  setView(view: ViewKind): void {
    if (this.surface) {
      this.scene.remove(this.surface);
      disposeObject(this.surface);
    }
    this.view = view;
    this.surface = buildSurface(view, this.surfaceMaterial);
    this.scene.add(this.surface);
  }

  setBackground(spec: BackgroundSpec): void {
    this.scene.background = new THREE.Color(spec.colors[0]);
  }

  rotate(dx: number, dy: number): void {
    this.viewState.rotationY += dx;
    this.viewState.rotationX += dy;
    // keep the poles from flipping over the top
    const limit = Math.PI / 2;
    if (this.viewState.rotationX > limit) this.viewState.rotationX = limit;
    if (this.viewState.rotationX < -limit) this.viewState.rotationX = -limit;
  }

  zoomBy(delta: number): void {
    const z = this.viewState.zoom * Math.exp(delta);
    this.viewState.zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, z));
  }

  /**
   * Build a mesh for one dataset in the given view: cloud-top sets render
   * as vertex-coloured line segments, orbits as a connected path.
   */
  buildMesh(points: DrawablePoints, view: ViewKind, range: ValueRange): SceneMesh {
    const arrays = buildMeshArrays(points, view);
    const colors = new Float32Array(points.n * arrays.verticesPerPoint * 3);
    writeColors(points.value, range, colors, arrays.verticesPerPoint);

    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(arrays.positions, 3));
    geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
    const material = new THREE.LineBasicMaterial({ vertexColors: true });
    const object =
      points.kind === "cloudtop"
        ? new THREE.LineSegments(geometry, material)
        : new THREE.Line(geometry, material);

    return {
      object,
      colors,
      verticesPerPoint: arrays.verticesPerPoint,
      pointCount: points.n,
      byteSize: arrays.positions.byteLength + colors.byteLength,
      dispose: () => {
        geometry.dispose();
        material.dispose();
      },
    };
  }

  /** Rewrite a mesh's colour attribute for a new legend range. */
  recolorMesh(mesh: SceneMesh, values: Float32Array, range: ValueRange): void {
    writeColors(values, range, mesh.colors, mesh.verticesPerPoint);
    const object = mesh.object as THREE.LineSegments;
    const attr = object.geometry.getAttribute("color") as THREE.BufferAttribute;
    attr.needsUpdate = true;
  }

  addMesh(mesh: SceneMesh): void {
    this.dataRoot.add(mesh.object);
  }

  removeMesh(mesh: SceneMesh): void {
    this.dataRoot.remove(mesh.object);
  }

  datasetObjectCount(): number {
    return this.dataRoot.children.length;
  }

  /** Apply view state, refresh world matrices and draw one frame. */
  renderFrame(): void {
    if (this.view === ViewKind.SPHERE) {
      this.dataRoot.rotation.set(this.viewState.rotationX, this.viewState.rotationY, 0);
      if (this.surface) {
        this.surface.rotation.copy(this.dataRoot.rotation);
      }
      this.perspective.position.z = 3.2 / this.viewState.zoom;
    } else {
      this.dataRoot.rotation.set(0, 0, 0);
      if (this.surface) this.surface.rotation.set(0, 0, 0);
      this.orthographic.zoom = this.viewState.zoom;
      this.orthographic.updateProjectionMatrix();
    }
    this.scene.updateMatrixWorld(true);
    this.renderer?.render(this.scene, this.activeCamera());
  }
}

function buildSurface(view: ViewKind, material: THREE.Material): THREE.Object3D {
  switch (view) {
    case ViewKind.SPHERE: {
      const globe = new THREE.Mesh(new THREE.SphereGeometry(GLOBE_RADIUS * 0.995, 48, 32), material);
      const grid = new THREE.LineSegments(
        new THREE.EdgesGeometry(new THREE.SphereGeometry(GLOBE_RADIUS, 24, 16)),
        new THREE.LineBasicMaterial({ color: 0x2a4a72 }),
      );
      const group = new THREE.Group();
      group.add(globe);
      group.add(grid);
      return group;
    }
    case ViewKind.PLANE: {
      const plane = new THREE.Mesh(new THREE.PlaneGeometry(4, 2), material);
      plane.position.z = -0.001;
      return plane;
    }
    case ViewKind.POLAR: {
      const disc = new THREE.Mesh(new THREE.CircleGeometry(2, 64), material);
      disc.position.z = -0.001;
      return disc;
    }
  }
}

function disposeObject(root: THREE.Object3D): void {
  root.traverse((node) => {
    const mesh = node as THREE.Mesh;
    if (mesh.geometry) mesh.geometry.dispose();
  });
}

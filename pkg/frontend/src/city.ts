/** Three.js scene graph for a city document, with overlay-driven visibility. */

import * as THREE from "three";

import type { ColorRGBA, GradientStop, SceneDocument, SceneNode } from "./types";

const NODE_ID_KEY = "vulncityNodeId";

function evaluateGradient(stops: GradientStop[], t: number): ColorRGBA {
  const sorted = [...stops].sort((a, b) => a.t - b.t);
  const first = sorted[0];
  const last = sorted[sorted.length - 1];
  if (t <= first.t) {
    return first.color;
  }
  if (t >= last.t) {
    return last.color;
  }
  for (let i = 1; i < sorted.length; i += 1) {
    const lo = sorted[i - 1];
    const hi = sorted[i];
    if (t <= hi.t) {
      const f = (t - lo.t) / (hi.t - lo.t);
      return {
        r: lo.color.r + (hi.color.r - lo.color.r) * f,
        g: lo.color.g + (hi.color.g - lo.color.g) * f,
        b: lo.color.b + (hi.color.b - lo.color.b) * f,
        a: lo.color.a + (hi.color.a - lo.color.a) * f,
      };
    }
  }
  return last.color;
}

function buildBox(node: SceneNode): THREE.Mesh {
  if (!("box" in node.geometry)) {
    throw new Error(`node ${node.id} is not a box`);
  }
  const { rect, y0, y1 } = node.geometry.box;
  const color = node.color as ColorRGBA;
  const material = new THREE.MeshLambertMaterial({
    color: new THREE.Color(color.r, color.g, color.b),
    transparent: color.a < 1,
    opacity: color.a,
  });
  const mesh = new THREE.Mesh(new THREE.BoxGeometry(rect.width, y1 - y0, rect.depth), material);
  mesh.position.set(rect.x + rect.width / 2, (y0 + y1) / 2, rect.z + rect.depth / 2);
  return mesh;
}

function buildArc(node: SceneNode): THREE.Line {
  if (!("arc" in node.geometry)) {
    throw new Error(`node ${node.id} is not an arc`);
  }
  const points = node.geometry.arc.points;
  const geometry = new THREE.BufferGeometry().setFromPoints(
    points.map(([x, y, z]) => new THREE.Vector3(x, y, z)),
  );
  const colors = new Float32Array(points.length * 3);
  const stops = "gradient" in node.color ? node.color.gradient : null;
  for (let i = 0; i < points.length; i += 1) {
    const t = points.length === 1 ? 0 : i / (points.length - 1);
    const color = stops ? evaluateGradient(stops, t) : (node.color as ColorRGBA);
    colors[i * 3] = color.r;
    colors[i * 3 + 1] = color.g;
    colors[i * 3 + 2] = color.b;
  }
  geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
  return new THREE.Line(geometry, new THREE.LineBasicMaterial({ vertexColors: true }));
}

/**
 * Renderable city. Node visibility is a pure function of the default set
 * plus the currently active overlays, so applying the same overlay state
 * twice is a no-op and remote toggles replay cleanly from any snapshot.
 */
export class CityScene {
  readonly root: THREE.Group;

  private readonly doc: SceneDocument;
  private readonly objects = new Map<string, THREE.Object3D>();
  private readonly nodesById = new Map<string, SceneNode>();
  private activeOverlays: string[] = [];

  constructor(doc: SceneDocument) {
    this.doc = doc;
    this.root = new THREE.Group();
    this.root.name = "city";
    for (const node of doc.nodes) {
      const object = "box" in node.geometry ? buildBox(node) : buildArc(node);
      object.name = node.id;
      object.userData[NODE_ID_KEY] = node.id;
      object.visible = node.visibleByDefault;
      this.objects.set(node.id, object);
      this.nodesById.set(node.id, node);
      this.root.add(object);
    }
  }

  get document(): SceneDocument {
    return this.doc;
  }

  /** Ids of every node currently shown. */
  visibleNodeIds(): string[] {
    const ids: string[] = [];
    for (const [id, object] of this.objects) {
      if (object.visible) {
        ids.push(id);
      }
    }
    return ids;
  }

  visibleNodeCount(): number {
    return this.visibleNodeIds().length;
  }

  /**
   * Recompute visibility from the authoritative active-overlay set:
   * default-visible nodes plus the arc and highlight nodes of every
   * active method overlay.
   */
  applyOverlayState(activeMethodIds: string[]): void {
    const shown = new Set<string>();
    for (const methodId of activeMethodIds) {
      const overlay = this.doc.overlays[methodId];
      if (overlay === undefined) {
        continue;
      }
      for (const id of overlay.arcNodeIds) {
        shown.add(id);
      }
      for (const id of overlay.highlightFloorNodeIds) {
        shown.add(id);
      }
    }
    for (const node of this.doc.nodes) {
      const object = this.objects.get(node.id);
      if (object !== undefined) {
        object.visible = node.visibleByDefault || shown.has(node.id);
      }
    }
    this.activeOverlays = [...activeMethodIds];
  }

  get overlayState(): string[] {
    return [...this.activeOverlays];
  }

  /** Node id behind a picked object, walking up through parents. */
  nodeIdOf(object: THREE.Object3D | null): string | undefined {
    let current: THREE.Object3D | null = object;
    while (current !== null) {
      const id = current.userData[NODE_ID_KEY];
      if (typeof id === "string") {
        return id;
      }
      current = current.parent;
    }
    return undefined;
  }

  /** The method a picked node documents, when it documents one. */
  methodIdOf(nodeId: string): string | undefined {
    return this.nodesById.get(nodeId)?.refs.methodId;
  }

  object(nodeId: string): THREE.Object3D | undefined {
    return this.objects.get(nodeId);
  }
}

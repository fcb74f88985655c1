/** Loading and validation of scene documents produced by the builder. */

import type {
  ArcShape,
  BoxShape,
  ColorRGBA,
  GradientStop,
  NodeKind,
  Overlay,
  SceneDocument,
  SceneNode,
} from "./types";

const NODE_KINDS: ReadonlySet<string> = new Set(["Platform", "Building", "Floor", "Arc"]);
const TOP_LEVEL_KEYS = ["legend", "metadata", "nodes", "overlays", "panels"] as const;

export class SceneFormatError extends Error {}

function fail(path: string, why: string): never {
  throw new SceneFormatError(`${path}: ${why}`);
}

function asObject(value: unknown, path: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(path, "expected an object");
  }
  return value as Record<string, unknown>;
}

function asArray(value: unknown, path: string): unknown[] {
  if (!Array.isArray(value)) {
    fail(path, "expected an array");
  }
  return value;
}

function asString(value: unknown, path: string): string {
  if (typeof value !== "string") {
    fail(path, "expected a string");
  }
  return value;
}

function asNumber(value: unknown, path: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    fail(path, "expected a finite number");
  }
  return value;
}

function parseColor(value: unknown, path: string): ColorRGBA {
  const obj = asObject(value, path);
  const color = {
    r: asNumber(obj.r, `${path}.r`),
    g: asNumber(obj.g, `${path}.g`),
    b: asNumber(obj.b, `${path}.b`),
    a: asNumber(obj.a, `${path}.a`),
  };
  for (const [key, component] of Object.entries(color)) {
    if (component < 0 || component > 1) {
      fail(`${path}.${key}`, `component ${component} outside [0, 1]`);
    }
  }
  return color;
}

function parseNodeColor(value: unknown, path: string): ColorRGBA | { gradient: GradientStop[] } {
  const obj = asObject(value, path);
  if (!("gradient" in obj)) {
    return parseColor(obj, path);
  }
  const stops = asArray(obj.gradient, `${path}.gradient`).map((raw, i) => {
    const stop = asObject(raw, `${path}.gradient[${i}]`);
    return {
      t: asNumber(stop.t, `${path}.gradient[${i}].t`),
      color: parseColor(stop.color, `${path}.gradient[${i}].color`),
    };
  });
  if (stops.length < 2) {
    fail(`${path}.gradient`, "needs at least two stops");
  }
  return { gradient: stops };
}

function parseGeometry(value: unknown, path: string): { box: BoxShape } | { arc: ArcShape } {
  const obj = asObject(value, path);
  if ("box" in obj) {
    const box = asObject(obj.box, `${path}.box`);
    const rect = asObject(box.rect, `${path}.box.rect`);
    return {
      box: {
        rect: {
          x: asNumber(rect.x, `${path}.box.rect.x`),
          z: asNumber(rect.z, `${path}.box.rect.z`),
          width: asNumber(rect.width, `${path}.box.rect.width`),
          depth: asNumber(rect.depth, `${path}.box.rect.depth`),
        },
        y0: asNumber(box.y0, `${path}.box.y0`),
        y1: asNumber(box.y1, `${path}.box.y1`),
      },
    };
  }
  if ("arc" in obj) {
    const arc = asObject(obj.arc, `${path}.arc`);
    const points = asArray(arc.points, `${path}.arc.points`).map((raw, i) => {
      const triple = asArray(raw, `${path}.arc.points[${i}]`);
      if (triple.length !== 3) {
        fail(`${path}.arc.points[${i}]`, "expected [x, y, z]");
      }
      return triple.map((c, j) => asNumber(c, `${path}.arc.points[${i}][${j}]`)) as [
        number,
        number,
        number,
      ];
    });
    if (points.length < 2) {
      fail(`${path}.arc.points`, "needs at least two samples");
    }
    return { arc: { points } };
  }
  fail(path, "expected box or arc geometry");
}

function parseNode(value: unknown, path: string): SceneNode {
  const obj = asObject(value, path);
  const kind = asString(obj.kind, `${path}.kind`);
  if (!NODE_KINDS.has(kind)) {
    fail(`${path}.kind`, `unknown node kind ${JSON.stringify(kind)}`);
  }
  const refs = asObject(obj.refs, `${path}.refs`);
  for (const [key, ref] of Object.entries(refs)) {
    asString(ref, `${path}.refs.${key}`);
  }
  if (typeof obj.visibleByDefault !== "boolean") {
    fail(`${path}.visibleByDefault`, "expected a boolean");
  }
  return {
    id: asString(obj.id, `${path}.id`),
    kind: kind as NodeKind,
    geometry: parseGeometry(obj.geometry, `${path}.geometry`),
    color: parseNodeColor(obj.color, `${path}.color`),
    refs: refs as Record<string, string>,
    visibleByDefault: obj.visibleByDefault,
  };
}

function parseOverlay(value: unknown, path: string, nodeIds: Set<string>): Overlay {
  const obj = asObject(value, path);
  const readIds = (key: "arcNodeIds" | "highlightFloorNodeIds"): string[] =>
    asArray(obj[key], `${path}.${key}`).map((raw, i) => {
      const id = asString(raw, `${path}.${key}[${i}]`);
      if (!nodeIds.has(id)) {
        fail(`${path}.${key}[${i}]`, `references unknown node ${JSON.stringify(id)}`);
      }
      return id;
    });
  return { arcNodeIds: readIds("arcNodeIds"), highlightFloorNodeIds: readIds("highlightFloorNodeIds") };
}

/** Validate a parsed scene JSON value into a typed document. */
export function parseSceneDocument(data: unknown): SceneDocument {
  const root = asObject(data, "scene");
  for (const key of TOP_LEVEL_KEYS) {
    if (!(key in root)) {
      fail("scene", `missing top-level key ${JSON.stringify(key)}`);
    }
  }

  const nodes = asArray(root.nodes, "nodes").map((raw, i) => parseNode(raw, `nodes[${i}]`));
  const nodeIds = new Set<string>();
  for (const node of nodes) {
    if (nodeIds.has(node.id)) {
      fail("nodes", `duplicate node id ${JSON.stringify(node.id)}`);
    }
    nodeIds.add(node.id);
  }

  const overlays: Record<string, Overlay> = {};
  for (const [methodId, raw] of Object.entries(asObject(root.overlays, "overlays"))) {
    overlays[methodId] = parseOverlay(raw, `overlays[${JSON.stringify(methodId)}]`, nodeIds);
  }

  const panels: SceneDocument["panels"] = {};
  for (const [methodId, raw] of Object.entries(asObject(root.panels, "panels"))) {
    const path = `panels[${JSON.stringify(methodId)}]`;
    const panel = asObject(raw, path);
    panels[methodId] = {
      methodId: asString(panel.methodId, `${path}.methodId`),
      title: asString(panel.title, `${path}.title`),
      loc: asNumber(panel.loc, `${path}.loc`),
      entries: asArray(panel.entries, `${path}.entries`).map((entryRaw, i) => {
        const entry = asObject(entryRaw, `${path}.entries[${i}]`);
        return {
          bugType: asString(entry.bugType, `${path}.entries[${i}].bugType`),
          severity: asString(entry.severity, `${path}.entries[${i}].severity`),
          shortMessage: asString(entry.shortMessage, `${path}.entries[${i}].shortMessage`),
          details: asString(entry.details, `${path}.entries[${i}].details`),
        };
      }),
    };
  }

  const legend = asArray(root.legend, "legend").map((raw, i) => {
    const entry = asObject(raw, `legend[${i}]`);
    return {
      label: asString(entry.label, `legend[${i}].label`),
      color: parseColor(entry.color, `legend[${i}].color`),
    };
  });

  const metadata = asObject(root.metadata, "metadata");
  const toolVersions: Record<string, string> = {};
  for (const [key, raw] of Object.entries(asObject(metadata.toolVersions, "metadata.toolVersions"))) {
    toolVersions[key] = asString(raw, `metadata.toolVersions.${key}`);
  }
  const layout: Record<string, number> = {};
  for (const [key, raw] of Object.entries(asObject(metadata.layout, "metadata.layout"))) {
    layout[key] = asNumber(raw, `metadata.layout.${key}`);
  }
  const prefixes = asArray(
    metadata.applicationPackagePrefixes,
    "metadata.applicationPackagePrefixes",
  ).map((raw, i) => asString(raw, `metadata.applicationPackagePrefixes[${i}]`));

  return {
    metadata: { toolVersions, layout, applicationPackagePrefixes: prefixes },
    nodes,
    panels,
    overlays,
    legend,
  };
}

/** Parse scene JSON text, surfacing syntax errors as SceneFormatError. */
export function parseSceneText(text: string): SceneDocument {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch (error) {
    fail("scene", `invalid JSON: ${(error as Error).message}`);
  }
  return parseSceneDocument(data);
}

/** How many nodes a freshly loaded city shows before any toggling. */
export function visibleByDefaultCount(doc: SceneDocument): number {
  return doc.nodes.filter((node) => node.visibleByDefault).length;
}

/** Shapes shared by the scene file and the session wire protocol. */

export interface ColorRGBA {
  r: number;
  g: number;
  b: number;
  a: number;
}

export interface GradientStop {
  t: number;
  color: ColorRGBA;
}

export interface RectShape {
  x: number;
  z: number;
  width: number;
  depth: number;
}

export interface BoxShape {
  rect: RectShape;
  y0: number;
  y1: number;
}

export interface ArcShape {
  points: [number, number, number][];
}

export type NodeKind = "Platform" | "Building" | "Floor" | "Arc";

export interface SceneNode {
  id: string;
  kind: NodeKind;
  geometry: { box: BoxShape } | { arc: ArcShape };
  color: ColorRGBA | { gradient: GradientStop[] };
  refs: Record<string, string>;
  visibleByDefault: boolean;
}

export interface PanelEntry {
  bugType: string;
  severity: string;
  shortMessage: string;
  details: string;
}

export interface PanelContent {
  methodId: string;
  title: string;
  loc: number;
  entries: PanelEntry[];
}

export interface Overlay {
  arcNodeIds: string[];
  highlightFloorNodeIds: string[];
}

export interface LegendEntry {
  label: string;
  color: ColorRGBA;
}

export interface SceneMetadata {
  toolVersions: Record<string, string>;
  layout: Record<string, number>;
  applicationPackagePrefixes: string[];
}

export interface SceneDocument {
  metadata: SceneMetadata;
  nodes: SceneNode[];
  panels: Record<string, PanelContent>;
  overlays: Record<string, Overlay>;
  legend: LegendEntry[];
}

/** Position and orientation of one tracked point (head or hand). */
export interface Pose {
  p: [number, number, number];
  q: [number, number, number, number];
}

export interface ParticipantState {
  userId: string;
  name: string;
  color: Record<string, number>;
  head: Pose;
  hands: Pose[];
}

export interface RoomSnapshot {
  sceneHash: string;
  participants: ParticipantState[];
  active: string[];
  follows: Record<string, string>;
}

export interface WelcomeMessage {
  type: "welcome";
  selfId: string;
  seq: number;
  snapshot: RoomSnapshot;
}

export interface JoinBroadcast {
  type: "join";
  seq: number;
  userId: string;
  name: string;
  color: Record<string, number>;
  head: Pose;
  hands: Pose[];
}

export interface PresenceBroadcast {
  type: "presence";
  seq: number;
  userId: string;
  head: Pose;
  hands: Pose[];
  resolvedPosition?: [number, number, number];
}

export interface OverlayStateBroadcast {
  type: "overlayState";
  seq: number;
  active: string[];
}

export interface FollowStateBroadcast {
  type: "followState";
  seq: number;
  follows: Record<string, string>;
}

export interface LeaveBroadcast {
  type: "leave";
  seq: number;
  userId: string;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  message: string;
}

export type ServerMessage =
  | WelcomeMessage
  | JoinBroadcast
  | PresenceBroadcast
  | OverlayStateBroadcast
  | FollowStateBroadcast
  | LeaveBroadcast
  | ErrorMessage;

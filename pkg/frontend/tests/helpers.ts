import { readFileSync } from "node:fs";

import { parseSceneText } from "../src/scene";
import type { Pose, SceneDocument } from "../src/types";

const GOLDEN_PATH = new URL("../../fixtures/sample/scene.golden.json", import.meta.url);

export function goldenSceneText(): string {
  return readFileSync(GOLDEN_PATH, "utf-8");
}

export function goldenScene(): SceneDocument {
  return parseSceneText(goldenSceneText());
}

/** Transport stub that records every outbound frame. */
export class CaptureTransport {
  readonly sent: string[] = [];

  send(text: string): void {
    this.sent.push(text);
  }

  sentMessages(): Record<string, unknown>[] {
    return this.sent.map((text) => JSON.parse(text) as Record<string, unknown>);
  }
}

export function pose(x: number, y: number, z: number): Pose {
  return { p: [x, y, z], q: [0, 0, 0, 1] };
}

let seqCounter = 0;

export function resetSeq(): void {
  seqCounter = 0;
}

export function nextSeq(): number {
  seqCounter += 1;
  return seqCounter;
}

/** Method detail panel backed entirely by the local scene document.
 *
 * The panel holds no transport reference by design: opening, scrolling,
 * and closing it can never produce network traffic, so what a user reads
 * stays private to their client.
 */

import type { PanelContent, SceneDocument } from "./types";

export interface PanelState {
  open: boolean;
  methodId: string | null;
  scrollOffset: number;
}

export class PanelController {
  private readonly doc: SceneDocument;
  private state: PanelState = { open: false, methodId: null, scrollOffset: 0 };

  constructor(doc: SceneDocument) {
    this.doc = doc;
  }

  /** Open the panel for a method; returns its content, or null if the
   * method has no panel (selection is cleared in that case). */
  open(methodId: string): PanelContent | null {
    const content = this.doc.panels[methodId];
    if (content === undefined) {
      this.close();
      return null;
    }
    this.state = { open: true, methodId, scrollOffset: 0 };
    return content;
  }

  scrollBy(delta: number): void {
    if (!this.state.open) {
      return;
    }
    this.state.scrollOffset = Math.max(0, this.state.scrollOffset + delta);
  }

  close(): void {
    this.state = { open: false, methodId: null, scrollOffset: 0 };
  }

  get current(): PanelState {
    return { ...this.state };
  }

  get content(): PanelContent | null {
    if (!this.state.open || this.state.methodId === null) {
      return null;
    }
    return this.doc.panels[this.state.methodId] ?? null;
  }
}

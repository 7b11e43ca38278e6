/**
 * Panel state machine. The flow is fixed: banner -> highlights ->
 * awareness panel -> action panel. The action panel can only be reached
 * through an awareness panel's take-action affordance, and at most one
 * panel is open at a time.
 */

import type { WireDetection } from "./protocol.js";

export type OpenPanel = "none" | "awareness" | "action" | "diary";

export class PanelState {
  detections: WireDetection[] = [];
  openPanel: OpenPanel = "none";
  selected: WireDetection | null = null;
  pendingEnhancement: string | null = null;
  consent: boolean;
  highlightsShown = false;

  constructor(consent = false) {
    this.consent = consent;
  }

  get bannerVisible(): boolean {
    return this.detections.length > 0;
  }

  setDetections(detections: WireDetection[]): void {
    this.detections = detections;
    if (this.selected) {
      const stillThere = detections.some(
        (d) =>
          d.pattern_id === this.selected!.pattern_id &&
          JSON.stringify(d.locator.path) === JSON.stringify(this.selected!.locator.path),
      );
      if (!stillThere) {
        this.closePanel();
      }
    }
  }

  toggleHighlights(): void {
    this.highlightsShown = !this.highlightsShown;
  }

  openAwareness(detection: WireDetection): void {
    this.selected = detection;
    this.pendingEnhancement = null;
    this.openPanel = "awareness";
  }

  takeAction(): void {
    if (this.openPanel !== "awareness" || !this.selected) {
      throw new Error("the action panel opens only from an awareness panel");
    }
    this.openPanel = "action";
  }

  openDiary(): void {
    this.openPanel = "diary";
  }

  closePanel(): void {
    this.openPanel = "none";
    this.selected = null;
    this.pendingEnhancement = null;
  }
}

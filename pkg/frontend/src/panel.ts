/**
 * The awareness/action panel: detection banner, element highlights,
 * awareness and action panels, diary notes, and profile-driven
 * reapplication on load. Everything the user reads about a pattern or an
 * enhancement comes from the gateway's catalog metadata; nothing is
 * hardcoded here.
 */

import { applySplice, elementsWithMarker, nodeAtPath, pageMarkup } from "./dom.js";
import {
  GatewayClient,
  GatewayError,
  WireDetection,
  WireReceipt,
} from "./protocol.js";
import { PanelState } from "./state.js";

export interface PanelOptions {
  site: string;
  participantId: string;
  consent?: boolean;
  pageToken?: string;
  /** Debounce for mutation-driven re-scans, in ms. */
  rescanDebounceMs?: number;
}

const WELFARE_LABELS: Record<string, string> = {
  "financial-loss": "Financial loss",
  "privacy-invasion": "Privacy invasion",
  "cognitive-burden": "Cognitive burden",
};

const STYLE = `
.pita-banner { position: sticky; top: 0; background: #1a1a2e; color: #fff;
  padding: 8px 12px; display: flex; gap: 8px; align-items: center; z-index: 9999; }
.pita-banner button { cursor: pointer; }
.pita-highlight { outline: 3px solid #e8a33d; outline-offset: 2px; cursor: pointer; }
.pita-highlight:hover { outline-color: #2f6fed; }
.pita-panel { position: fixed; right: 16px; top: 48px; width: 340px; background: #fff;
  border: 1px solid #ccc; border-radius: 8px; padding: 12px; z-index: 10000; }
.pita-tag { display: inline-block; background: #eef; border: 1px solid #99c;
  border-radius: 10px; padding: 1px 8px; margin-right: 4px; font-size: 12px; }
.pita-option { border: 1px solid #ddd; border-radius: 6px; padding: 8px; margin: 6px 0; }
.pita-option.pita-active { border-color: #2f6fed; background: #f3f7ff; }
.pita-preview { background: #fafafa; border: 1px dashed #bbb; padding: 6px;
  margin-top: 6px; font-size: 12px; overflow: auto; }
.pita-error { color: #b3261e; }
`;

function el(
  doc: Document,
  tag: string,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

interface AppliedPattern {
  enhancementId: string;
  receipts: WireReceipt[];
  saved: boolean;
}

export class PitaPanel {
  readonly state: PanelState;
  readonly ui: HTMLElement;
  bootError: string | null = null;
  private readonly doc: Document;
  private readonly applied = new Map<string, AppliedPattern>();
  private observer: MutationObserver | null = null;
  private rescanTimer: ReturnType<typeof setTimeout> | null = null;
  private readonly debounceMs: number;

  constructor(
    private readonly container: HTMLElement,
    private readonly client: GatewayClient,
    private readonly options: PanelOptions,
  ) {
    this.doc = container.ownerDocument;
    this.state = new PanelState(options.consent ?? false);
    this.debounceMs = options.rescanDebounceMs ?? 500;
    this.ui = el(this.doc, "div", { class: "pita-root" });
    const style = el(this.doc, "style");
    style.textContent = STYLE;
    this.ui.appendChild(style);
    container.insertAdjacentElement("afterend", this.ui);
  }

  // -- lifecycle -----------------------------------------------------------

  async boot(): Promise<void> {
    await this.log("page-visited", { page_token: this.options.pageToken ?? "demo" });
    try {
      await this.rescan();
      this.bootError = null;
    } catch (error) {
      this.bootError = error instanceof Error ? error.message : String(error);
      this.render();
      return;
    }
    if (this.state.detections.length > 0) {
      await this.log("probe-triggered", {});
    }
    await this.reapplyFromProfile();
    this.startObserver();
  }

  dispose(): void {
    this.stopObserver();
    if (this.rescanTimer) {
      clearTimeout(this.rescanTimer);
    }
    this.ui.remove();
  }

  /** Re-detect against the current page and re-render. */
  async rescan(): Promise<void> {
    const result = await this.client.detect(pageMarkup(this.container), this.options.site);
    this.state.setDetections(result.detections);
    this.render();
  }

  private startObserver(): void {
    if (typeof MutationObserver === "undefined") {
      return;
    }
    this.observer = new MutationObserver(() => this.scheduleRescan());
    this.observer.observe(this.container, { childList: true, subtree: true });
  }

  private stopObserver(): void {
    this.observer?.disconnect();
  }

  private scheduleRescan(): void {
    if (this.rescanTimer) {
      clearTimeout(this.rescanTimer);
    }
    this.rescanTimer = setTimeout(() => {
      this.rescanTimer = null;
      void this.rescan();
    }, this.debounceMs);
  }

  /** Run a DOM edit of our own without triggering the re-scan observer. */
  private withObserverPaused<T>(edit: () => T): T {
    this.stopObserver();
    try {
      return edit();
    } finally {
      if (this.observer) {
        this.observer.observe(this.container, { childList: true, subtree: true });
      }
    }
  }

  // -- profile reapplication --------------------------------------------------

  async reapplyFromProfile(): Promise<void> {
    const { profile } = await this.client.getProfile();
    for (const selection of profile.selections) {
      if (selection.site !== this.options.site) {
        continue;
      }
      await this.applySelection(selection.pattern_id, selection.enhancement_id, {
        saved: true,
      });
    }
    this.render();
  }

  /**
   * Apply one enhancement to every current detection of its pattern,
   * splicing each patched fragment into the live page.
   */
  async applySelection(
    patternId: string,
    enhancementId: string,
    flags: { saved?: boolean } = {},
  ): Promise<void> {
    const existing = this.applied.get(patternId);
    if (existing && existing.enhancementId !== enhancementId) {
      await this.revertPattern(patternId);
    }
    const receipts: WireReceipt[] = this.applied.get(patternId)?.receipts ?? [];
    for (let guard = 0; guard < 20; guard += 1) {
      const markup = pageMarkup(this.container);
      const { detections } = await this.client.detect(markup, this.options.site);
      const target = detections.find((d) => {
        if (d.pattern_id !== patternId) {
          return false;
        }
        const node = nodeAtPath(this.container, d.locator.path) as Element;
        return !node.hasAttribute("data-pita-enhancement");
      });
      if (!target) {
        break;
      }
      const result = await this.client.apply(markup, target, enhancementId);
      this.withObserverPaused(() => applySplice(this.container, result.splice));
      receipts.push(result.receipt);
      await this.log("enhancement-triggered", {
        pattern_id: patternId,
        enhancement_id: enhancementId,
      });
    }
    if (receipts.length > 0) {
      this.applied.set(patternId, {
        enhancementId,
        receipts,
        saved: flags.saved ?? this.applied.get(patternId)?.saved ?? false,
      });
      await this.fillWidgetSlots();
    }
    await this.rescan();
  }

  /** Undo every applied instance of a pattern, newest first. */
  async revertPattern(patternId: string): Promise<void> {
    const entry = this.applied.get(patternId);
    if (!entry) {
      return;
    }
    for (const receipt of [...entry.receipts].reverse()) {
      const markup = pageMarkup(this.container);
      const { splice } = await this.client.revert(markup, receipt);
      if (splice) {
        this.withObserverPaused(() => applySplice(this.container, splice));
      }
    }
    this.applied.delete(patternId);
    await this.rescan();
  }

  appliedEnhancement(patternId: string): string | null {
    return this.applied.get(patternId)?.enhancementId ?? null;
  }

  // -- telemetry ------------------------------------------------------------

  private async log(kind: string, extra: Record<string, string>): Promise<void> {
    try {
      await this.client.logEvent(
        {
          kind,
          timestamp: new Date().toISOString(),
          site: this.options.site,
          participant_id: this.options.participantId,
          ...extra,
        },
        this.state.consent,
      );
    } catch {
      // Telemetry must never break the page.
    }
  }

  private async fillWidgetSlots(): Promise<void> {
    const widgets = this.container.querySelectorAll("[data-pita-widget='reflection']");
    if (widgets.length === 0) {
      return;
    }
    const { figures } = await this.client.getReflection(this.options.site);
    const minutes = (seconds: number) => `${Math.round(seconds / 60)} min`;
    for (const widget of Array.from(widgets)) {
      const slot = (name: string) => widget.querySelector(`[data-pita-slot="${name}"]`);
      slot("active-time")!.textContent = `active: ${minutes(figures.active_seconds)}`;
      slot("flagged-interactions")!.textContent =
        `flagged interactions: ${figures.flagged_interactions}`;
      slot("attributed-extra-time")!.textContent =
        `attributed extra time: ${minutes(figures.attributed_extra_seconds)}`;
      slot("extra-cost")!.textContent =
        figures.extra_cost === null ? "" : `estimated extra cost: ${figures.extra_cost}`;
    }
  }

  // -- rendering --------------------------------------------------------------

  render(): void {
    for (const stale of Array.from(
      this.ui.querySelectorAll(".pita-banner, .pita-panel, .pita-error"),
    )) {
      stale.remove();
    }
    this.renderHighlights();
    if (this.bootError) {
      this.renderBootError();
      return;
    }
    if (this.state.bannerVisible) {
      this.renderBanner();
    }
    if (this.state.openPanel === "awareness") {
      this.renderAwareness();
    } else if (this.state.openPanel === "action") {
      this.renderAction();
    } else if (this.state.openPanel === "diary") {
      this.renderDiary();
    }
  }

  private renderBootError(): void {
    const box = el(this.doc, "div", { class: "pita-error" }, "The helper service is unreachable.");
    const retry = el(this.doc, "button", { class: "pita-retry" }, "Retry");
    retry.addEventListener("click", () => {
      this.bootError = null;
      void this.boot();
    });
    box.appendChild(retry);
    this.ui.appendChild(box);
  }

  private renderBanner(): void {
    const count = this.state.detections.length;
    const banner = el(this.doc, "div", { class: "pita-banner", role: "status" });
    banner.appendChild(
      el(this.doc, "span", { class: "pita-banner-text" },
        `${count} dark pattern${count === 1 ? "" : "s"} detected on this page`),
    );
    const show = el(this.doc, "button", { class: "pita-show" },
      this.state.highlightsShown ? "Hide" : "Show");
    show.addEventListener("click", () => {
      this.state.toggleHighlights();
      this.render();
    });
    banner.appendChild(show);
    const diary = el(this.doc, "button", { class: "pita-diary-open" }, "Diary note");
    diary.addEventListener("click", () => {
      this.state.openDiary();
      this.render();
    });
    banner.appendChild(diary);
    this.ui.appendChild(banner);
  }

  private renderHighlights(): void {
    for (const element of Array.from(this.container.querySelectorAll(".pita-highlight"))) {
      element.classList.remove("pita-highlight");
    }
    if (!this.state.highlightsShown) {
      return;
    }
    for (const detection of this.state.detections) {
      let element: Element;
      try {
        element = nodeAtPath(this.container, detection.locator.path) as Element;
      } catch {
        continue;
      }
      element.classList.add("pita-highlight");
      if (!(element as HTMLElement).dataset.pitaWired) {
        (element as HTMLElement).dataset.pitaWired = "1";
        element.addEventListener("click", (event) => {
          if (!this.state.highlightsShown) {
            return;
          }
          event.preventDefault();
          event.stopPropagation();
          this.state.openAwareness(detection);
          void this.log("awareness-panel-opened", { pattern_id: detection.pattern_id });
          this.render();
        });
      }
    }
  }

  private panelShell(title: string): HTMLElement {
    const panel = el(this.doc, "div", { class: "pita-panel" });
    const heading = el(this.doc, "h3", {}, title);
    const close = el(this.doc, "button", { class: "pita-close" }, "Close");
    close.addEventListener("click", () => {
      this.state.closePanel();
      this.render();
    });
    panel.appendChild(heading);
    panel.appendChild(close);
    return panel;
  }

  private renderAwareness(): void {
    const detection = this.state.selected!;
    const meta = detection.pattern;
    const panel = this.panelShell(meta.name);
    panel.classList.add("pita-awareness");

    const tags = el(this.doc, "div", { class: "pita-tags" });
    for (const attribute of meta.attributes) {
      tags.appendChild(
        el(this.doc, "span", {
          class: "pita-tag",
          "data-attribute": attribute,
          title: meta.attribute_tooltips[attribute] ?? "",
        }, attribute),
      );
    }
    panel.appendChild(tags);
    panel.appendChild(el(this.doc, "p", { class: "pita-mechanism" }, meta.mechanism_text));
    panel.appendChild(
      el(this.doc, "h4", { class: "pita-welfare" },
        WELFARE_LABELS[meta.impact.category] ?? meta.impact.category),
    );
    panel.appendChild(el(this.doc, "p", { class: "pita-severity" }, meta.impact.severity_text));

    const act = el(this.doc, "button", { class: "pita-take-action" }, "Take Action");
    act.addEventListener("click", () => {
      this.state.takeAction();
      void this.log("action-panel-opened", { pattern_id: detection.pattern_id });
      this.render();
    });
    panel.appendChild(act);
    this.ui.appendChild(panel);
  }

  private renderAction(): void {
    const detection = this.state.selected!;
    const meta = detection.pattern;
    const panel = this.panelShell(meta.name);
    panel.classList.add("pita-action");
    const active = this.appliedEnhancement(detection.pattern_id);

    for (const enhancement of meta.enhancements) {
      const option = el(this.doc, "div", {
        class: "pita-option" + (enhancement.id === active ? " pita-active" : ""),
        "data-enhancement": enhancement.id,
      });
      option.appendChild(
        el(this.doc, "span", { class: "pita-tag" },
          `${enhancement.strategy} · ${enhancement.dimension}`),
      );
      option.appendChild(el(this.doc, "p", {}, enhancement.effect_text));

      const preview = el(this.doc, "button", { class: "pita-preview-toggle" }, "Preview");
      preview.addEventListener("click", () => {
        void this.showPreview(option, detection, enhancement.id);
      });
      option.appendChild(preview);

      const select = el(this.doc, "button", { class: "pita-select" },
        enhancement.id === active ? "Applied" : "Apply");
      select.addEventListener("click", () => {
        this.state.pendingEnhancement = enhancement.id;
        void this.applySelection(detection.pattern_id, enhancement.id).then(() => {
          this.state.openPanel = "action";
          this.state.selected = detection;
          this.render();
        });
      });
      option.appendChild(select);
      panel.appendChild(option);
    }

    const save = el(this.doc, "button", { class: "pita-save" }, "Save for next visit");
    save.addEventListener("click", () => {
      void this.saveCurrent(detection.pattern_id);
    });
    panel.appendChild(save);

    const reset = el(this.doc, "button", { class: "pita-reset" }, "Remove enhancement");
    reset.addEventListener("click", () => {
      void this.resetPattern(detection.pattern_id, detection);
    });
    panel.appendChild(reset);
    this.ui.appendChild(panel);
  }

  private async showPreview(
    option: HTMLElement,
    detection: WireDetection,
    enhancementId: string,
  ): Promise<void> {
    // The gateway is stateless: an apply we never splice is a preview.
    const result = await this.client.apply(
      pageMarkup(this.container), detection, enhancementId,
    );
    option.querySelector(".pita-preview")?.remove();
    const box = el(this.doc, "div", { class: "pita-preview" });
    const before = el(this.doc, "pre", { class: "pita-preview-before" });
    before.textContent = result.diff.before_fragment;
    const after = el(this.doc, "pre", { class: "pita-preview-after" });
    after.textContent = result.diff.after_fragment;
    const toggle = el(this.doc, "button", { class: "pita-preview-flip" }, "Show after");
    let showingAfter = false;
    after.style.display = "none";
    toggle.addEventListener("click", () => {
      showingAfter = !showingAfter;
      before.style.display = showingAfter ? "none" : "";
      after.style.display = showingAfter ? "" : "none";
      toggle.textContent = showingAfter ? "Show before" : "Show after";
    });
    box.appendChild(toggle);
    box.appendChild(before);
    box.appendChild(after);
    option.appendChild(box);
  }

  private async saveCurrent(patternId: string): Promise<void> {
    const entry = this.applied.get(patternId);
    if (!entry) {
      return;
    }
    await this.client.saveSelection(this.options.site, patternId, entry.enhancementId);
    entry.saved = true;
    await this.log("enhancement-saved", {
      pattern_id: patternId,
      enhancement_id: entry.enhancementId,
    });
    this.render();
  }

  private async resetPattern(patternId: string, detection: WireDetection): Promise<void> {
    const entry = this.applied.get(patternId);
    await this.revertPattern(patternId);
    await this.client.clearSelection(this.options.site, patternId);
    if (entry) {
      await this.log("enhancement-cleared", {
        pattern_id: patternId,
        enhancement_id: entry.enhancementId,
      });
    }
    this.state.openPanel = "action";
    this.state.selected = detection;
    this.render();
  }

  private renderDiary(): void {
    const panel = this.panelShell("Diary note");
    panel.classList.add("pita-diary");
    const body = el(this.doc, "textarea", {
      class: "pita-diary-body",
      placeholder: "What did you notice?",
    }) as HTMLTextAreaElement;
    const attachment = el(this.doc, "input", {
      class: "pita-diary-attachment",
      placeholder: "screenshot reference (optional)",
    }) as HTMLInputElement;
    const submit = el(this.doc, "button", { class: "pita-diary-submit" }, "Submit") as
      HTMLButtonElement;
    submit.disabled = true;
    body.addEventListener("input", () => {
      submit.disabled = body.value.trim().length === 0;
    });
    const status = el(this.doc, "p", { class: "pita-diary-status" }, "");
    submit.addEventListener("click", () => {
      void (async () => {
        const refs = attachment.value.trim() ? [attachment.value.trim()] : [];
        const { ack } = await this.client.submitNote(
          {
            timestamp: new Date().toISOString(),
            participant_id: this.options.participantId,
            body: body.value,
            attachments: refs,
          },
          this.state.consent,
        );
        status.textContent =
          ack === "recorded"
            ? "Saved. Thank you!"
            : "Not recorded: consent is off, so nothing leaves this page.";
        if (ack === "recorded") {
          body.value = "";
          submit.disabled = true;
        }
      })();
    });
    panel.appendChild(body);
    panel.appendChild(attachment);
    panel.appendChild(submit);
    panel.appendChild(status);
    this.ui.appendChild(panel);
  }
}

export async function bootPanel(
  container: HTMLElement,
  client: GatewayClient,
  options: PanelOptions,
): Promise<PitaPanel> {
  const panel = new PitaPanel(container, client, options);
  await panel.boot();
  return panel;
}

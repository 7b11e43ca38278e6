/**
 * Demo-page end-to-end: the real fixtures through the real gateway.
 * Covers the release flow: banner -> highlights -> awareness -> action ->
 * apply -> save -> reload-reapplies, plus diary scrubbing.
 */

import { readFileSync } from "node:fs";
import { readFile } from "node:fs/promises";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { afterEach, beforeEach, describe, expect, inject, it } from "vitest";

import { mountFixture } from "../src/dom.js";
import { bootPanel, PitaPanel } from "../src/panel.js";
import { GatewayClient } from "../src/protocol.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "../../fixtures");
const PORT = inject("gatewayPort");
const LOG_DIR = inject("logDir");

const client = () => new GatewayClient(`http://127.0.0.1:${PORT}`);

function mount(rel: string): HTMLElement {
  document.body.innerHTML = "";
  const container = document.createElement("div");
  container.id = "demo-site";
  document.body.appendChild(container);
  mountFixture(readFileSync(join(FIXTURES, rel), "utf-8"), container);
  return container;
}

async function waitFor<T>(probe: () => T | null | undefined | false, what = "condition"):
    Promise<T> {
  const deadline = Date.now() + 10_000;
  for (;;) {
    const value = probe();
    if (value) {
      return value;
    }
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}

let panel: PitaPanel | null = null;

beforeEach(async () => {
  // Selections persist in the shared serve process; start each test clean.
  const c = client();
  const { profile } = await c.getProfile();
  for (const selection of profile.selections) {
    await c.clearSelection(selection.site, selection.pattern_id);
  }
});

afterEach(() => {
  panel?.dispose();
  panel = null;
});

describe("banner", () => {
  it("appears on a fixture with detections and reports the count", async () => {
    const container = mount("amazon/product.html");
    panel = await bootPanel(container, client(), {
      site: "amazon", participantId: "ui-test", consent: false,
    });
    const banner = panel.ui.querySelector(".pita-banner");
    expect(banner).not.toBeNull();
    expect(banner!.textContent).toContain("1 dark pattern detected");
  });

  it("does not appear on a control page", async () => {
    const container = mount("controls/amazon_product.html");
    panel = await bootPanel(container, client(), {
      site: "amazon", participantId: "ui-test", consent: false,
    });
    expect(panel.ui.querySelector(".pita-banner")).toBeNull();
  });

  it("counts every instance on multi-detection pages", async () => {
    const container = mount("twitter/home.html");
    panel = await bootPanel(container, client(), {
      site: "twitter", participantId: "ui-test", consent: false,
    });
    expect(panel.ui.querySelector(".pita-banner")!.textContent)
      .toContain("4 dark patterns detected");
  });
});

describe("highlight to awareness to action", () => {
  async function openAwareness(): Promise<HTMLElement> {
    const container = mount("amazon/product.html");
    panel = await bootPanel(container, client(), {
      site: "amazon", participantId: "ui-test", consent: false,
    });
    (panel.ui.querySelector(".pita-show") as HTMLElement).click();
    const highlighted = await waitFor(
      () => container.querySelector(".pita-highlight") as HTMLElement,
      "highlight overlay",
    );
    expect(highlighted.id).toBe("buy-now-button");
    highlighted.click();
    return waitFor(
      () => panel!.ui.querySelector(".pita-awareness") as HTMLElement,
      "awareness panel",
    );
  }

  it("renders the catalog attributes with tooltips, mechanism, and impact", async () => {
    const awareness = await openAwareness();
    const tags = Array.from(awareness.querySelectorAll(".pita-tag"))
      .map((tag) => tag.getAttribute("data-attribute"));
    expect(tags).toEqual(["asymmetric", "covert"]);
    expect(tags).not.toContain("restrictive");
    const covert = awareness.querySelector('[data-attribute="covert"]')!;
    expect(covert.getAttribute("title")!.length).toBeGreaterThan(10);
    expect(awareness.querySelector(".pita-mechanism")!.textContent).toContain("Buy Now");
    expect(awareness.querySelector(".pita-welfare")!.textContent).toBe("Financial loss");
    expect(awareness.querySelector(".pita-severity")!.textContent!.length).toBeGreaterThan(10);
  });

  it("take action opens the action panel with the catalog's options in order", async () => {
    const awareness = await openAwareness();
    (awareness.querySelector(".pita-take-action") as HTMLElement).click();
    const action = await waitFor(
      () => panel!.ui.querySelector(".pita-action") as HTMLElement,
      "action panel",
    );
    expect(panel!.ui.querySelector(".pita-awareness")).toBeNull();
    const options = Array.from(action.querySelectorAll(".pita-option"))
      .map((option) => option.getAttribute("data-enhancement"));
    expect(options).toEqual(["hiding-buy-now", "fairness-buy-now", "friction-buy-now"]);
  });

  it("preview shows before and after fragments without touching the page", async () => {
    const awareness = await openAwareness();
    (awareness.querySelector(".pita-take-action") as HTMLElement).click();
    const action = await waitFor(
      () => panel!.ui.querySelector(".pita-action") as HTMLElement,
      "action panel",
    );
    const fairness = action.querySelector('[data-enhancement="fairness-buy-now"]')!;
    (fairness.querySelector(".pita-preview-toggle") as HTMLElement).click();
    const preview = await waitFor(
      () => fairness.querySelector(".pita-preview"),
      "preview box",
    );
    expect(preview!.querySelector(".pita-preview-before")!.textContent)
      .not.toContain("background-color: #FFD814");
    expect(preview!.querySelector(".pita-preview-after")!.textContent)
      .toContain("background-color: #FFD814");
    const button = document.querySelector("#buy-now-button") as HTMLElement;
    expect(button.getAttribute("style")).toBeNull();
  });
});

describe("applying enhancements", () => {
  it("fairness visibly recolors the buy-now element and save+reload reapplies it",
      async () => {
    const container = mount("amazon/product.html");
    panel = await bootPanel(container, client(), {
      site: "amazon", participantId: "ui-test", consent: false,
    });
    await panel.applySelection("prominent-buy-now", "fairness-buy-now");
    let button = container.querySelector("#buy-now-button") as HTMLElement;
    expect(button.getAttribute("style")).toContain("background-color: #FFD814");
    expect(button.getAttribute("data-pita-enhancement")).toBe("fairness-buy-now");

    await client().saveSelection("amazon", "prominent-buy-now", "fairness-buy-now");

    // Reload: fresh mount of the pristine fixture, new panel instance.
    panel.dispose();
    const reloaded = mount("amazon/product.html");
    expect((reloaded.querySelector("#buy-now-button") as HTMLElement)
      .getAttribute("style")).toBeNull();
    panel = await bootPanel(reloaded, client(), {
      site: "amazon", participantId: "ui-test", consent: false,
    });
    button = await waitFor(() => {
      const candidate = reloaded.querySelector("#buy-now-button") as HTMLElement;
      return candidate.getAttribute("style") ? candidate : null;
    }, "reapplied recolor");
    expect(button.getAttribute("style")).toContain("background-color: #FFD814");
  });

  it("selecting a different option reverts the first before applying the second",
      async () => {
    const container = mount("amazon/product.html");
    panel = await bootPanel(container, client(), {
      site: "amazon", participantId: "ui-test", consent: false,
    });
    await panel.applySelection("prominent-buy-now", "fairness-buy-now");
    await panel.applySelection("prominent-buy-now", "hiding-buy-now");
    const button = container.querySelector("#buy-now-button") as HTMLElement;
    expect(button.getAttribute("data-pita-enhancement")).toBe("hiding-buy-now");
    const style = button.getAttribute("style") ?? "";
    expect(style).toContain("display: none");
    expect(style).not.toContain("#FFD814");

    await panel.revertPattern("prominent-buy-now");
    expect((container.querySelector("#buy-now-button") as HTMLElement)
      .getAttribute("style")).toBeNull();
  });

  it("patches every instance of a multi-detection pattern", async () => {
    const container = mount("amazon/search.html");
    panel = await bootPanel(container, client(), {
      site: "amazon", participantId: "ui-test", consent: false,
    });
    await panel.applySelection("disguised-ads-amazon", "hiding-amazon-ads");
    const hidden = container.querySelectorAll('[data-pita-enhancement="hiding-amazon-ads"]');
    expect(hidden.length).toBe(2);
  });

  it("fills reflection widget slots from the telemetry query", async () => {
    const container = mount("netflix/watch.html");
    panel = await bootPanel(container, client(), {
      site: "netflix", participantId: "ui-test", consent: false,
    });
    await panel.applySelection("hiding-total-episode-time", "reflection-netflix-time");
    const widget = container.querySelector('[data-pita-widget="reflection"]')!;
    expect(widget.querySelector('[data-pita-slot="active-time"]')!.textContent)
      .toMatch(/active: \d+ min/);
  });
});

describe("diary notes", () => {
  async function openDiary(consent: boolean): Promise<HTMLElement> {
    const container = mount("amazon/product.html");
    panel = await bootPanel(container, client(), {
      site: "amazon", participantId: "ui-test", consent,
    });
    (panel.ui.querySelector(".pita-diary-open") as HTMLElement).click();
    return waitFor(
      () => panel!.ui.querySelector(".pita-diary") as HTMLElement,
      "diary panel",
    );
  }

  it("submit stays disabled while the body is empty", async () => {
    const diary = await openDiary(true);
    const submit = diary.querySelector(".pita-diary-submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    const body = diary.querySelector(".pita-diary-body") as HTMLTextAreaElement;
    body.value = "something";
    body.dispatchEvent(new Event("input", { bubbles: true }));
    expect(submit.disabled).toBe(false);
  });

  it("persists notes scrubbed and keeps attachments as references", async () => {
    const diary = await openDiary(true);
    const body = diary.querySelector(".pita-diary-body") as HTMLTextAreaElement;
    const nonce = `note-${Date.now()}`;
    body.value = `${nonce}: the countdown felt fake, reach me at tester@example.com`;
    body.dispatchEvent(new Event("input", { bubbles: true }));
    const attachment = diary.querySelector(".pita-diary-attachment") as HTMLInputElement;
    attachment.value = "screenshot-042.png";
    (diary.querySelector(".pita-diary-submit") as HTMLElement).click();
    await waitFor(
      () => diary.querySelector(".pita-diary-status")!.textContent!.includes("Saved"),
      "submit acknowledgment",
    );
    const stored = await readFile(join(LOG_DIR, "notes.jsonl"), "utf-8");
    const line = stored.split("\n").find((row) => row.includes(nonce))!;
    expect(line).toBeDefined();
    expect(line).not.toContain("tester@example.com");
    expect(line).toContain("[REDACTED-EMAIL]");
    expect(line).toContain("screenshot-042.png");
  });

  it("explains suppression when consent is off", async () => {
    const diary = await openDiary(false);
    const body = diary.querySelector(".pita-diary-body") as HTMLTextAreaElement;
    body.value = "this should not be stored";
    body.dispatchEvent(new Event("input", { bubbles: true }));
    (diary.querySelector(".pita-diary-submit") as HTMLElement).click();
    const status = await waitFor(
      () => {
        const text = diary.querySelector(".pita-diary-status")!.textContent!;
        return text.length > 0 ? text : null;
      },
      "suppression notice",
    );
    expect(status).toContain("consent is off");
  });
});

describe("dynamic pages", () => {
  it("re-scans after DOM mutations (debounced) and keeps the banner current",
      async () => {
    const container = mount("twitter/home.html");
    panel = await bootPanel(container, client(), {
      site: "twitter", participantId: "ui-test", consent: false,
      rescanDebounceMs: 10,
    });
    expect(panel.state.detections.length).toBe(4);

    // The feed injects one more disguised suggested tweet.
    const feed = container.querySelector('[aria-label="Timeline: Your Home Timeline"]')!;
    const article = document.createElement("article");
    article.setAttribute("role", "article");
    article.setAttribute("data-testid", "tweet-99");
    article.innerHTML =
      '<div class="social-context">Popular video</div><div class="tweet-text">late insert</div>';
    feed.appendChild(article);

    await waitFor(() => panel!.state.detections.length === 5, "re-scan to pick up the insert");
    expect(panel!.ui.querySelector(".pita-banner")!.textContent)
      .toContain("5 dark patterns detected");
  });
});

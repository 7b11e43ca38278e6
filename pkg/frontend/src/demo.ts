/**
 * Standalone demo shell: loads a bundled fixture page into a container
 * and runs the full panel against a locally running gateway
 * (`pita serve --port 8943 --consent`).
 */

import { mountFixture } from "./dom.js";
import { bootPanel, PitaPanel } from "./panel.js";
import { GatewayClient } from "./protocol.js";

const FIXTURES: Record<string, string> = {
  "amazon product": "../../fixtures/amazon/product.html",
  "amazon search": "../../fixtures/amazon/search.html",
  "amazon pricing": "../../fixtures/amazon/pricing.html",
  "amazon home": "../../fixtures/amazon/home.html",
  "youtube home": "../../fixtures/youtube/home.html",
  "youtube watch": "../../fixtures/youtube/watch.html",
  "netflix home": "../../fixtures/netflix/home.html",
  "netflix watch": "../../fixtures/netflix/watch.html",
  "twitter home": "../../fixtures/twitter/home.html",
  "facebook feed": "../../fixtures/facebook/feed.html",
  "control (amazon product)": "../../fixtures/controls/amazon_product.html",
};

function participantId(): string {
  const existing = localStorage.getItem("pita-participant");
  if (existing) {
    return existing;
  }
  const bytes = new Uint8Array(16);
  crypto.getRandomValues(bytes);
  const token = Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
  localStorage.setItem("pita-participant", token);
  return token;
}

let panel: PitaPanel | null = null;

async function load(label: string): Promise<void> {
  const picker = document.querySelector<HTMLSelectElement>("#fixture-picker")!;
  const consent = document.querySelector<HTMLInputElement>("#consent-toggle")!;
  const container = document.querySelector<HTMLElement>("#pita-demo-site")!;
  const gateway = document.querySelector<HTMLInputElement>("#gateway-url")!;

  panel?.dispose();
  const markup = await (await fetch(FIXTURES[label]!)).text();
  mountFixture(markup, container);
  const site = label.startsWith("control") ? "amazon" : label.split(" ")[0]!;
  panel = await bootPanel(container, new GatewayClient(gateway.value), {
    site,
    participantId: participantId(),
    consent: consent.checked,
    pageToken: label.replace(/\s+/g, "-"),
  });
  picker.value = label;
}

export function startDemo(): void {
  const picker = document.querySelector<HTMLSelectElement>("#fixture-picker")!;
  for (const label of Object.keys(FIXTURES)) {
    const option = document.createElement("option");
    option.value = label;
    option.textContent = label;
    picker.appendChild(option);
  }
  picker.addEventListener("change", () => void load(picker.value));
  document
    .querySelector<HTMLInputElement>("#consent-toggle")!
    .addEventListener("change", () => void load(picker.value));
  void load(Object.keys(FIXTURES)[0]!);
}

startDemo();

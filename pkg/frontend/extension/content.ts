/**
 * Extension shell entry. MV3 content scripts cannot be ES modules, so
 * the packaged `content-loader.js` injects this file as a module script
 * via chrome.runtime.getURL; from there the regular panel boot runs
 * against the page body with the site derived from the host.
 */

import { bootPanel } from "../src/panel.js";
import { GatewayClient } from "../src/protocol.js";

const SITE_BY_HOST: Record<string, string> = {
  "www.amazon.com": "amazon",
  "www.youtube.com": "youtube",
  "www.netflix.com": "netflix",
  "www.facebook.com": "facebook",
  "twitter.com": "twitter",
};

function participantId(): string {
  const key = "pita-participant";
  const existing = localStorage.getItem(key);
  if (existing) {
    return existing;
  }
  const bytes = new Uint8Array(16);
  crypto.getRandomValues(bytes);
  const token = Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
  localStorage.setItem(key, token);
  return token;
}

const site = SITE_BY_HOST[location.host];
if (site) {
  void bootPanel(document.body, new GatewayClient("http://127.0.0.1:8943"), {
    site,
    participantId: participantId(),
    consent: false,
    pageToken: location.pathname,
  });
}

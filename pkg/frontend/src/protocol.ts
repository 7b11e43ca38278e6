/**
 * Typed client for the gateway wire protocol (POST /v1/message).
 * One request, one response; errors come back as {ok:false, error}.
 */

export interface WireLocator {
  path: number[];
  fingerprint: [string, string] | null;
}

export interface WireEnhancement {
  id: string;
  strategy: string;
  dimension: string;
  effect_text: string;
}

export interface WirePatternMeta {
  id: string;
  name: string;
  site: string;
  pattern_types: string[];
  attributes: string[];
  attribute_tooltips: Record<string, string>;
  mechanism_text: string;
  impact: { category: string; severity_text: string };
  enhancements: WireEnhancement[];
}

export interface WireDetection {
  pattern_id: string;
  locator: WireLocator;
  site: string;
  rule_index: number;
  matched_excerpt: string;
  pattern: WirePatternMeta;
}

export interface WireSplice {
  parent_path: number[];
  start: number;
  remove_count: number;
  markup: string;
}

export interface WireDiff {
  before_fragment: string;
  after_fragment: string;
  changes: Array<Record<string, unknown>>;
}

export interface WireReceipt {
  enhancement_id: string;
  pattern_id: string;
  locator: WireLocator;
  entries: unknown[];
  applied_at: string;
  noop: boolean;
}

export interface WireSelection {
  site: string;
  pattern_id: string;
  enhancement_id: string;
  updated_at: string;
}

export interface WireProfile {
  catalog_version: string;
  selections: WireSelection[];
}

export interface ApplyResult {
  receipt: WireReceipt;
  diff: WireDiff;
  splice: WireSplice;
}

export interface ReflectionFigures {
  active_seconds: number;
  flagged_interactions: number;
  attributed_extra_seconds: number;
  extra_cost: number | null;
}

export interface WireEvent {
  kind: string;
  timestamp: string;
  site: string;
  participant_id: string;
  pattern_id?: string;
  enhancement_id?: string;
  page_token?: string;
}

export interface WireNote {
  timestamp: string;
  participant_id: string;
  body: string;
  attachments?: string[];
}

export class GatewayError extends Error {
  constructor(public code: string, message: string) {
    super(message);
    this.name = "GatewayError";
  }
}

export class GatewayClient {
  private seq = 0;

  constructor(private baseUrl: string) {}

  private async send<T>(type: string, payload: unknown): Promise<T> {
    this.seq += 1;
    const request_id = `ui-${Date.now()}-${this.seq}`;
    const response = await fetch(`${this.baseUrl}/v1/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ type, request_id, payload }),
    });
    const body = await response.json();
    if (!body.ok) {
      throw new GatewayError(body.error?.code ?? "unknown", body.error?.message ?? "gateway error");
    }
    return body.payload as T;
  }

  ping(): Promise<{ pong: boolean; protocol_version: number }> {
    return this.send("ping", {});
  }

  detect(html: string, site: string): Promise<{ site: string; detections: WireDetection[] }> {
    return this.send("detect", { html, site });
  }

  apply(html: string, detection: WireDetection, enhancementId: string): Promise<ApplyResult> {
    const { pattern_id, locator, site, rule_index } = detection;
    return this.send("apply", {
      html,
      detection: { pattern_id, locator, site, rule_index },
      enhancement_id: enhancementId,
    });
  }

  revert(html: string, receipt: WireReceipt): Promise<{ splice: WireSplice | null }> {
    return this.send("revert", { html, receipt });
  }

  saveSelection(site: string, patternId: string, enhancementId: string): Promise<{ profile: WireProfile }> {
    return this.send("save_selection", {
      site, pattern_id: patternId, enhancement_id: enhancementId,
    });
  }

  clearSelection(site: string, patternId: string): Promise<{ profile: WireProfile }> {
    return this.send("clear_selection", { site, pattern_id: patternId });
  }

  getProfile(): Promise<{ profile: WireProfile }> {
    return this.send("get_profile", {});
  }

  logEvent(event: WireEvent, consent?: boolean): Promise<{ ack: string }> {
    return this.send("log_event", consent === undefined ? { event } : { event, consent });
  }

  submitNote(note: WireNote, consent?: boolean): Promise<{ ack: string }> {
    return this.send("submit_note", consent === undefined ? { note } : { note, consent });
  }

  getReflection(site: string): Promise<{ figures: ReflectionFigures }> {
    return this.send("get_reflection", { site });
  }
}

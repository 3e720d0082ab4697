// Thin client over the session service; fetch is injectable for tests.

import type { SessionState, TurnResult, ActionName } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

// Keys that would leak the vehicle's hidden commitment if they ever
// appeared in a state payload.  The commitment is revealed only in a
// TurnResult, after the pedestrian's action is in.
const FORBIDDEN_STATE_KEYS = new Set([
  "vehicle_action",
  "car_action",
  "committed_action",
  "equilibrium",
  "p_vehicle_slow",
]);

export function assertStateSafe(payload: unknown, path = ""): void {
  if (Array.isArray(payload)) {
    payload.forEach((item, i) => assertStateSafe(item, `${path}[${i}]`));
    return;
  }
  if (payload !== null && typeof payload === "object") {
    for (const [key, value] of Object.entries(payload)) {
      if (FORBIDDEN_STATE_KEYS.has(key)) {
        throw new Error(`state payload leaks hidden commitment at ${path}.${key}`);
      }
      assertStateSafe(value, path ? `${path}.${key}` : key);
    }
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    private base = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const text = await resp.text();
    if (!resp.ok) {
      let detail = text;
      try {
        detail = JSON.parse(text).detail ?? text;
      } catch {
        // plain-text error body
      }
      throw new ApiError(resp.status, detail);
    }
    return JSON.parse(text) as T;
  }

  async createSession(config: Record<string, unknown> = {}): Promise<SessionState> {
    const state = await this.request<SessionState>("/api/sessions", {
      method: "POST",
      body: JSON.stringify(config),
    });
    assertStateSafe(state);
    return state;
  }

  async getState(sessionId: string): Promise<SessionState> {
    const state = await this.request<SessionState>(`/api/sessions/${sessionId}`);
    assertStateSafe(state);
    return state;
  }

  submitAction(sessionId: string, action: ActionName): Promise<TurnResult> {
    return this.request<TurnResult>(`/api/sessions/${sessionId}/turns`, {
      method: "POST",
      body: JSON.stringify({ action }),
    });
  }

  async exportText(sessionId?: string): Promise<string> {
    const query = sessionId ? `?session_id=${encodeURIComponent(sessionId)}` : "";
    const resp = await this.fetchImpl(`${this.base}/api/export${query}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return resp.text();
  }

  exportUrl(sessionId?: string): string {
    const query = sessionId ? `?session_id=${encodeURIComponent(sessionId)}` : "";
    return `${this.base}/api/export${query}`;
  }
}

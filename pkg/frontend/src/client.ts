/** Thin HTTP client for the session endpoints. */

import type { AnswerPayload, AnswerSummary, QueryView } from "./protocol.js";

export class SessionError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function post<T>(base: string, path: string, body: unknown): Promise<T> {
  const resp = await fetch(`${base}${path}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  const data = (await resp.json()) as T & { error?: string };
  if (!resp.ok) {
    throw new SessionError(data.error ?? `request failed (${resp.status})`, resp.status);
  }
  return data;
}

export class SessionClient {
  private sessionId: string | null = null;

  constructor(private readonly base: string = "") {}

  get id(): string | null {
    return this.sessionId;
  }

  async create(configRef: string): Promise<string> {
    const data = await post<{ session_id: string }>(this.base, "/create", {
      config_ref: configRef,
    });
    this.sessionId = data.session_id;
    return data.session_id;
  }

  async next(): Promise<QueryView> {
    if (!this.sessionId) throw new SessionError("no session", 0);
    return post<QueryView>(this.base, "/next", { session_id: this.sessionId });
  }

  async answer(queryId: string, payload: AnswerPayload, elapsedMs: number): Promise<AnswerSummary> {
    if (!this.sessionId) throw new SessionError("no session", 0);
    return post<AnswerSummary>(this.base, "/answer", {
      session_id: this.sessionId,
      query_id: queryId,
      payload,
      elapsed_ms: Math.max(0, Math.round(elapsedMs)),
    });
  }
}

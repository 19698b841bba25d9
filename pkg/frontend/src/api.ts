// Thin typed client over the documented JSON API. The server is the only
// source of truth; this module never computes stress values locally.

import type { Rating, ServerSession, SessionCreated, StressSummary } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
    public code?: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new ApiError(`network error: ${String(err)}`, 0);
  }
  if (resp.status === 204) {
    return undefined as T;
  }
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    // non-JSON error bodies fall through to the status check
  }
  if (!resp.ok) {
    const detail = (body as { detail?: string; error?: string }) ?? {};
    throw new ApiError(detail.detail ?? `HTTP ${resp.status}`, resp.status, detail.error);
  }
  return body as T;
}

export class ChatApi {
  constructor(private baseUrl: string = "") {}

  health(): Promise<{ status: string }> {
    return request(`${this.baseUrl}/api/health`);
  }

  createSession(userName: string): Promise<SessionCreated> {
    return request(`${this.baseUrl}/api/session`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ user_name: userName }),
    });
  }

  getSession(sessionId: string): Promise<ServerSession> {
    return request(`${this.baseUrl}/api/session/${sessionId}`);
  }

  sendMessage(sessionId: string, text: string): Promise<{ assistant_text: string }> {
    return request(`${this.baseUrl}/api/session/${sessionId}/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  submitRating(sessionId: string, rating: Rating): Promise<void> {
    return request(`${this.baseUrl}/api/session/${sessionId}/rating`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(rating),
    });
  }

  stressSummary(): Promise<StressSummary> {
    return request(`${this.baseUrl}/api/stress/summary`);
  }
}

// Session state as pure data plus transition functions, so the invariant
// "UI state equals the server session replay" is directly testable.

import type { Role, ServerSession, StressSummary } from "./types.js";

export interface Bubble {
  role: Role;
  text: string;
  failed?: boolean;
}

export type RatingPhase = "idle" | "submitting" | "done";

export interface UiSessionState {
  sessionId: string | null;
  userName: string;
  banner: StressSummary | null;
  bubbles: Bubble[]; // user/assistant only; the system prompt is not rendered
  pending: boolean; // a message is in flight
  error: string | null;
  ratingPhase: RatingPhase;
}

export function initialState(): UiSessionState {
  return {
    sessionId: null,
    userName: "",
    banner: null,
    bubbles: [],
    pending: false,
    error: null,
    ratingPhase: "idle",
  };
}

export function sessionStarted(
  state: UiSessionState,
  sessionId: string,
  userName: string,
  greeting: string,
  banner: StressSummary,
): UiSessionState {
  return {
    ...state,
    sessionId,
    userName,
    banner,
    bubbles: [{ role: "assistant", text: greeting }],
    error: null,
  };
}

export function startFailed(state: UiSessionState, message: string): UiSessionState {
  return { ...state, error: message };
}

export function userSent(state: UiSessionState, text: string): UiSessionState {
  return {
    ...state,
    bubbles: [...state.bubbles, { role: "user", text }],
    pending: true,
    error: null,
  };
}

export function assistantReplied(state: UiSessionState, text: string): UiSessionState {
  return {
    ...state,
    bubbles: [...state.bubbles, { role: "assistant", text }],
    pending: false,
  };
}

export function sendFailed(state: UiSessionState, message: string): UiSessionState {
  const bubbles = state.bubbles.slice();
  for (let i = bubbles.length - 1; i >= 0; i--) {
    if (bubbles[i].role === "user") {
      bubbles[i] = { ...bubbles[i], failed: true };
      break;
    }
  }
  return { ...state, bubbles, pending: false, error: message };
}

export function retryStarted(state: UiSessionState): UiSessionState {
  const bubbles = state.bubbles.map((b) => (b.failed ? { ...b, failed: false } : b));
  return { ...state, bubbles, pending: true, error: null };
}

export function ratingSubmitting(state: UiSessionState): UiSessionState {
  return { ...state, ratingPhase: "submitting" };
}

export function ratingDone(state: UiSessionState): UiSessionState {
  return { ...state, ratingPhase: "done" };
}

export function ratingFailed(state: UiSessionState, message: string): UiSessionState {
  return { ...state, ratingPhase: "idle", error: message };
}

/** Client-side validation mirroring the API schema (1..5 integers). */
export function ratingValid(quality: number, empathy: number): boolean {
  const ok = (v: number) => Number.isInteger(v) && v >= 1 && v <= 5;
  return ok(quality) && ok(empathy);
}

/** The canonical state the server's session replay implies. */
export function stateFromServerSession(
  session: ServerSession,
  banner: StressSummary | null = null,
): UiSessionState {
  const bubbles: Bubble[] = session.messages
    .filter((m) => m.role !== "system")
    .map((m, i, arr) => {
      const failed =
        session.last_send_failed && m.role === "user" && i === arr.length - 1;
      return failed ? { role: m.role, text: m.text, failed: true } : { role: m.role, text: m.text };
    });
  return {
    sessionId: session.session_id,
    userName: session.user_name,
    banner: banner ?? session.summary,
    bubbles,
    pending: false,
    error: null,
    ratingPhase: session.rating ? "done" : "idle",
  };
}

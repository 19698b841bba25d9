import { describe, expect, it } from "vitest";

import {
  assistantReplied,
  initialState,
  ratingDone,
  ratingSubmitting,
  ratingValid,
  retryStarted,
  sendFailed,
  sessionStarted,
  stateFromServerSession,
  userSent,
} from "../src/state.js";
import type { ServerSession, StressSummary } from "../src/types.js";

const summary: StressSummary = {
  period_start_s: 0,
  period_end_s: 120,
  windows_total: 12,
  windows_stressed: 3,
  stressed_fraction: 0.25,
  episodes: [{ start_s: 10, end_s: 80 }],
  peak_probability: 0.9,
};

function started() {
  return sessionStarted(initialState(), "abc", "Alice", "Hi Alice!", summary);
}

describe("session state transitions", () => {
  it("renders the greeting as the first bubble", () => {
    const s = started();
    expect(s.bubbles).toEqual([{ role: "assistant", text: "Hi Alice!" }]);
    expect(s.banner).toEqual(summary);
  });

  it("keeps messages in send order with a pending flag", () => {
    let s = userSent(started(), "hello");
    expect(s.pending).toBe(true);
    s = assistantReplied(s, "hi there");
    expect(s.pending).toBe(false);
    expect(s.bubbles.map((b) => b.role)).toEqual(["assistant", "user", "assistant"]);
  });

  it("marks the failed user message and clears it on retry", () => {
    let s = userSent(started(), "hello");
    s = sendFailed(s, "LLM unavailable");
    expect(s.bubbles.at(-1)).toMatchObject({ role: "user", failed: true });
    expect(s.error).toBe("LLM unavailable");
    s = retryStarted(s);
    expect(s.bubbles.at(-1)?.failed).toBe(false);
    expect(s.pending).toBe(true);
  });

  it("blocks double rating submits via phases", () => {
    let s = ratingSubmitting(started());
    expect(s.ratingPhase).toBe("submitting");
    s = ratingDone(s);
    expect(s.ratingPhase).toBe("done");
  });

  it("validates rating ranges client-side", () => {
    expect(ratingValid(1, 5)).toBe(true);
    expect(ratingValid(0, 3)).toBe(false);
    expect(ratingValid(3, 6)).toBe(false);
    expect(ratingValid(2.5, 3)).toBe(false);
  });
});

describe("server replay equivalence", () => {
  it("reconstructs the UI state from a server session", () => {
    const session: ServerSession = {
      session_id: "abc",
      created_at: 0,
      user_name: "Alice",
      locale: "en",
      summary,
      messages: [
        { role: "system", text: "persona", ts: 0 },
        { role: "assistant", text: "Hi Alice!", ts: 1 },
        { role: "user", text: "hello", ts: 2 },
        { role: "assistant", text: "hi there", ts: 3 },
      ],
      rating: null,
      last_send_failed: false,
      truncated: false,
    };
    let s = userSent(started(), "hello");
    s = assistantReplied(s, "hi there");
    expect(s).toEqual(stateFromServerSession(session));
  });

  it("reflects a trailing failed send", () => {
    const session: ServerSession = {
      session_id: "abc",
      created_at: 0,
      user_name: "Alice",
      locale: "en",
      summary,
      messages: [
        { role: "system", text: "persona", ts: 0 },
        { role: "assistant", text: "Hi Alice!", ts: 1 },
        { role: "user", text: "hello", ts: 2 },
      ],
      rating: null,
      last_send_failed: true,
      truncated: false,
    };
    const replay = stateFromServerSession(session);
    expect(replay.bubbles.at(-1)).toMatchObject({ role: "user", failed: true });
    let s = userSent(started(), "hello");
    s = sendFailed(s, "boom");
    expect({ ...s, error: null }).toEqual(replay);
  });
});

import { beforeEach, describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { stateFromServerSession } from "../src/state.js";
import type { Rating, ServerMessage, ServerSession, StressSummary } from "../src/types.js";
import { App, bannerText } from "../src/ui.js";

const quietSummary: StressSummary = {
  period_start_s: 0,
  period_end_s: 0,
  windows_total: 0,
  windows_stressed: 0,
  stressed_fraction: 0,
  episodes: [],
  peak_probability: 0,
};

const busySummary: StressSummary = {
  ...quietSummary,
  period_end_s: 600,
  windows_total: 100,
  windows_stressed: 30,
  stressed_fraction: 0.3,
  episodes: [
    { start_s: 60, end_s: 180 },
    { start_s: 300, end_s: 420 },
  ],
  peak_probability: 0.97,
};

/** In-memory stand-in that mirrors the real server's session semantics. */
class FakeServer {
  session: ServerSession | null = null;
  summary: StressSummary;
  failNextSend = false;
  downUntilRetry = false;

  constructor(summary: StressSummary) {
    this.summary = summary;
  }

  async createSession(userName: string) {
    if (this.downUntilRetry) {
      this.downUntilRetry = false;
      throw new ApiError("network error", 0);
    }
    const greeting = `Hi ${userName || "there"}! I'm Em. Would you like to talk about your day?`;
    this.session = {
      session_id: "fake1",
      created_at: 0,
      user_name: userName,
      locale: "en",
      summary: this.summary,
      messages: [
        { role: "system", text: "persona prompt", ts: 0 },
        { role: "assistant", text: greeting, ts: 1 },
      ] as ServerMessage[],
      rating: null,
      last_send_failed: false,
      truncated: false,
    };
    return { session_id: "fake1", greeting };
  }

  async getSession() {
    if (!this.session) throw new ApiError("no such session", 404);
    return structuredClone(this.session);
  }

  async sendMessage(_id: string, text: string) {
    const s = this.session!;
    s.messages.push({ role: "user", text, ts: s.messages.length });
    if (this.failNextSend) {
      this.failNextSend = false;
      s.last_send_failed = true;
      throw new ApiError("LlmUnavailable", 503, "LlmUnavailable");
    }
    s.last_send_failed = false;
    const reply = `echo: ${text}`;
    s.messages.push({ role: "assistant", text: reply, ts: s.messages.length });
    return { assistant_text: reply };
  }

  async submitRating(_id: string, rating: Rating) {
    this.session!.rating = { ...rating };
  }

  async stressSummary() {
    return structuredClone(this.summary);
  }

  async health() {
    return { status: "ok" };
  }
}

function mount(summary: StressSummary = busySummary) {
  const fake = new FakeServer(summary);
  const root = document.createElement("div");
  document.body.innerHTML = "";
  document.body.appendChild(root);
  const app = new App(root, fake as never);
  return { fake, root, app };
}

function input(root: HTMLElement, id: string): HTMLInputElement {
  return root.querySelector(`#${id}`) as HTMLInputElement;
}

describe("start_session", () => {
  it("renders the greeting with the user's name and the server banner", async () => {
    const { root, app } = mount();
    await app.startSession("Alice");
    const bubbles = root.querySelectorAll(".msg.assistant");
    expect(bubbles).toHaveLength(1);
    expect(bubbles[0].textContent).toContain("Alice");
    expect(root.querySelector("#banner")?.textContent).toBe(bannerText(busySummary));
    expect(root.querySelector("#banner")?.textContent).toContain("2 stress episodes");
    expect(root.querySelector("#banner")?.textContent).toContain("30.0%");
  });

  it("shows the no-stress banner for a quiet day", async () => {
    const { root, app } = mount({ ...quietSummary, windows_total: 50 });
    await app.startSession("Bo");
    expect(root.querySelector("#banner")?.textContent).toContain("No stress detected");
  });

  it("keeps an explicit error state with a retry affordance when the API is down", async () => {
    const { fake, root, app } = mount();
    fake.downUntilRetry = true;
    await app.startSession("Alice");
    const errorBox = root.querySelector("#start-error") as HTMLElement;
    expect(errorBox.hidden).toBe(false);
    expect(errorBox.textContent).toContain("cannot reach the server");
    // the retry affordance works once the server is back
    (root.querySelector("#start-retry") as HTMLButtonElement).click();
    await new Promise((r) => setTimeout(r));
    expect(app.state.sessionId).toBe("fake1");
  });
});

describe("send_and_render", () => {
  it("appends user and assistant bubbles in order", async () => {
    const { fake, root, app } = mount();
    await app.startSession("Alice");
    input(root, "input").value = "rough day";
    await app.sendCurrent();
    const roles = [...root.querySelectorAll(".msg")].map((el) => el.className);
    expect(roles).toEqual(["msg assistant", "msg user", "msg assistant"]);
    expect(app.state).toEqual(stateFromServerSession(await fake.getSession()));
  });

  it("disables send for empty input", async () => {
    const { root, app } = mount();
    await app.startSession("Alice");
    const send = root.querySelector("#send") as HTMLButtonElement;
    input(root, "input").value = "   ";
    input(root, "input").dispatchEvent(new Event("input", { bubbles: true }));
    expect(send.disabled).toBe(true);
    input(root, "input").value = "hello";
    input(root, "input").dispatchEvent(new Event("input", { bubbles: true }));
    expect(send.disabled).toBe(false);
  });

  it("marks a failed send with a retry chip and recovers on retry", async () => {
    const { fake, root, app } = mount();
    await app.startSession("Alice");
    fake.failNextSend = true;
    input(root, "input").value = "hello";
    await app.sendCurrent();
    expect(root.querySelector(".msg.user.failed")).not.toBeNull();
    expect(root.querySelector(".retry-chip")).not.toBeNull();
    await app.retryLast();
    expect(root.querySelector(".msg.user.failed")).toBeNull();
    expect([...root.querySelectorAll(".msg.assistant")].at(-1)?.textContent).toBe("echo: hello");
  });
});

describe("submit_rating", () => {
  it("posts a schema-shaped body and shows the thanks state", async () => {
    const { fake, root, app } = mount();
    await app.startSession("Alice");
    input(root, "quality").value = "4";
    input(root, "empathy").value = "5";
    input(root, "comment").value = "helpful";
    await app.submitRating();
    expect(fake.session?.rating).toEqual({ quality: 4, empathy: 5, comment: "helpful" });
    expect((root.querySelector("#thanks") as HTMLElement).hidden).toBe(false);
    expect((root.querySelector("#rate-btn") as HTMLButtonElement).disabled).toBe(true);
  });

  it("blocks out-of-range values client-side", async () => {
    const { fake, root, app } = mount();
    await app.startSession("Alice");
    const quality = input(root, "quality");
    quality.innerHTML += `<option value="9">9</option>`;
    quality.value = "9";
    await app.submitRating();
    expect(fake.session?.rating).toBeNull();
    expect(app.state.ratingPhase).toBe("idle");
    expect((root.querySelector("#rating-error") as HTMLElement).hidden).toBe(false);
  });

  it("blocks a second submit", async () => {
    const { fake, root, app } = mount();
    await app.startSession("Alice");
    input(root, "quality").value = "3";
    input(root, "empathy").value = "3";
    await app.submitRating();
    input(root, "comment").value = "changed my mind";
    await app.submitRating();
    expect(fake.session?.rating).toEqual({ quality: 3, empathy: 3, comment: "" });
  });
});

describe("server replay equivalence", () => {
  it("matches the server session after a full conversation", async () => {
    const { fake, root, app } = mount();
    await app.startSession("Riley");
    for (const text of ["one", "two", "three"]) {
      input(root, "input").value = text;
      await app.sendCurrent();
    }
    input(root, "quality").value = "5";
    input(root, "empathy").value = "4";
    await app.submitRating();
    const replay = stateFromServerSession(await fake.getSession());
    expect(app.state).toEqual({ ...replay, banner: app.state.banner });
    expect(app.state.banner).toEqual(await fake.stressSummary());
  });
});

// DOM wiring: renders UiSessionState and forwards user intents to the API.

import { ApiError, ChatApi } from "./api.js";
import {
  UiSessionState,
  assistantReplied,
  initialState,
  ratingDone,
  ratingFailed,
  ratingSubmitting,
  ratingValid,
  retryStarted,
  sendFailed,
  sessionStarted,
  startFailed,
  userSent,
} from "./state.js";
import type { StressSummary } from "./types.js";

export function bannerText(summary: StressSummary): string {
  if (summary.windows_total === 0) {
    return "No physiological data recorded today.";
  }
  const pct = (summary.stressed_fraction * 100).toFixed(1);
  const n = summary.episodes.length;
  if (n === 0) {
    return `No stress detected today (${pct}% of windows stressed).`;
  }
  const noun = n === 1 ? "stress episode" : "stress episodes";
  return `${n} ${noun} today; ${pct}% of monitored windows stressed.`;
}

export class App {
  state: UiSessionState = initialState();
  private lastUserText = "";

  constructor(
    private root: HTMLElement,
    private api: ChatApi,
  ) {
    this.root.innerHTML = `
      <div id="start" class="card">
        <h1>emllm</h1>
        <p>Your end-of-day stress check-in.</p>
        <form id="start-form">
          <input id="name" type="text" placeholder="Your name" autocomplete="name">
          <button id="start-btn" type="submit">Start session</button>
        </form>
        <div id="start-error" class="error" hidden>
          <span></span> <button id="start-retry" type="button">Retry</button>
        </div>
      </div>
      <div id="chat" hidden>
        <div id="banner" class="banner"></div>
        <div id="messages"></div>
        <form id="composer">
          <input id="input" type="text" placeholder="Type a message" autocomplete="off">
          <button id="send" type="submit" disabled>Send</button>
        </form>
        <form id="rating" class="card">
          <h2>Rate this session</h2>
          <label>Quality
            <select id="quality">${options()}</select>
          </label>
          <label>Empathy
            <select id="empathy">${options()}</select>
          </label>
          <input id="comment" type="text" placeholder="Anything to add?">
          <button id="rate-btn" type="submit">Submit rating</button>
          <p id="thanks" hidden>Thank you! Your rating was recorded.</p>
          <p id="rating-error" class="error" hidden></p>
        </form>
      </div>`;

    this.el("start-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.startSession(this.input("name").value);
    });
    this.el("start-retry").addEventListener("click", () => {
      void this.startSession(this.input("name").value);
    });
    this.el("composer").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.sendCurrent();
    });
    this.el("input").addEventListener("input", () => this.syncComposer());
    this.el("rating").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitRating();
    });
    this.el("messages").addEventListener("click", (e) => {
      const target = e.target as HTMLElement;
      if (target.classList.contains("retry-chip")) {
        void this.retryLast();
      }
    });
  }

  private el(id: string): HTMLElement {
    return this.root.querySelector(`#${id}`) as HTMLElement;
  }

  private input(id: string): HTMLInputElement {
    return this.el(id) as HTMLInputElement;
  }

  private setState(next: UiSessionState): void {
    this.state = next;
    this.render();
  }

  async startSession(userName: string): Promise<void> {
    try {
      const created = await this.api.createSession(userName);
      const banner = await this.api.stressSummary();
      this.setState(
        sessionStarted(this.state, created.session_id, userName, created.greeting, banner),
      );
    } catch (err) {
      this.setState(startFailed(this.state, describe(err)));
    }
  }

  async sendCurrent(): Promise<void> {
    const text = this.input("input").value.trim();
    if (!text || this.state.pending || !this.state.sessionId) {
      return;
    }
    this.input("input").value = "";
    this.lastUserText = text;
    this.setState(userSent(this.state, text));
    await this.deliver(text);
  }

  async retryLast(): Promise<void> {
    if (!this.lastUserText || this.state.pending) {
      return;
    }
    this.setState(retryStarted(this.state));
    await this.deliver(this.lastUserText);
  }

  private async deliver(text: string): Promise<void> {
    try {
      const reply = await this.api.sendMessage(this.state.sessionId as string, text);
      this.setState(assistantReplied(this.state, reply.assistant_text));
    } catch (err) {
      this.setState(sendFailed(this.state, describe(err)));
    }
  }

  async submitRating(): Promise<void> {
    if (this.state.ratingPhase !== "idle" || !this.state.sessionId) {
      return; // double submits are blocked client-side
    }
    const quality = Number(this.input("quality").value);
    const empathy = Number(this.input("empathy").value);
    if (!ratingValid(quality, empathy)) {
      this.setState(ratingFailed(this.state, "ratings must be whole numbers from 1 to 5"));
      return;
    }
    this.setState(ratingSubmitting(this.state));
    try {
      await this.api.submitRating(this.state.sessionId, {
        quality,
        empathy,
        comment: this.input("comment").value,
      });
      this.setState(ratingDone(this.state));
    } catch (err) {
      this.setState(ratingFailed(this.state, describe(err)));
    }
  }

  private syncComposer(): void {
    const send = this.el("send") as HTMLButtonElement;
    send.disabled = this.state.pending || this.input("input").value.trim() === "";
  }

  render(): void {
    const started = this.state.sessionId !== null;
    this.el("start").hidden = started;
    this.el("chat").hidden = !started;

    const startError = this.el("start-error");
    startError.hidden = started || this.state.error === null;
    if (!startError.hidden) {
      (startError.querySelector("span") as HTMLElement).textContent = this.state.error;
    }
    if (!started) {
      return;
    }

    this.el("banner").textContent = this.state.banner ? bannerText(this.state.banner) : "";

    const messages = this.el("messages");
    messages.innerHTML = "";
    for (const bubble of this.state.bubbles) {
      const div = document.createElement("div");
      div.className = `msg ${bubble.role}${bubble.failed ? " failed" : ""}`;
      div.textContent = bubble.text;
      if (bubble.failed) {
        const chip = document.createElement("button");
        chip.type = "button";
        chip.className = "retry-chip";
        chip.textContent = "Retry";
        div.appendChild(chip);
      }
      messages.appendChild(div);
    }
    if (this.state.pending) {
      const div = document.createElement("div");
      div.className = "msg assistant pending";
      div.textContent = "…";
      messages.appendChild(div);
    }
    if (this.state.error && this.state.ratingPhase === "idle" && !this.state.pending) {
      const hasFailedBubble = this.state.bubbles.some((b) => b.failed);
      if (!hasFailedBubble) {
        const div = document.createElement("div");
        div.className = "msg error";
        div.textContent = this.state.error;
        messages.appendChild(div);
      }
    }

    this.syncComposer();
    const rateBtn = this.el("rate-btn") as HTMLButtonElement;
    rateBtn.disabled = this.state.ratingPhase !== "idle";
    this.el("thanks").hidden = this.state.ratingPhase !== "done";
    const ratingError = this.el("rating-error");
    const showRatingError =
      this.state.ratingPhase === "idle" && this.state.error !== null &&
      this.state.error.startsWith("ratings must");
    ratingError.hidden = !showRatingError;
    if (showRatingError) {
      ratingError.textContent = this.state.error;
    }
  }
}

function options(): string {
  return [1, 2, 3, 4, 5].map((v) => `<option value="${v}">${v}</option>`).join("");
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status === 0 ? "cannot reach the server" : err.message;
  }
  return String(err);
}

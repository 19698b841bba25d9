"""Empathic chat orchestration: persona prompt, greeting, LLM client, sessions.

The system prompt carries the persona (trained psychologist, CBT,
explain-your-refusals) and injects the monitor's stress summary; the LLM
behind it is any chat-completion-style HTTP endpoint. Sessions are
append-only JSONL event logs, one file per session, reloadable at any
point. Only summary fields ever reach the LLM or disk, never raw signal
samples, and the API key is never serialized anywhere.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import requests

from .monitor import StressSummary

PERSONA_CLAUSE = (
    "You are a trained psychologist holding a supportive end-of-day conversation."
)
CBT_CLAUSE = (
    "Follow the principles of cognitive behavioral therapy (CBT): help the user "
    "notice the links between thoughts, feelings, and behaviors, gently question "
    "unhelpful thought patterns, and steer toward small, concrete next steps."
)
REFUSAL_CLAUSE = (
    "Whenever you cannot answer a question, provide a reasonable explanation of "
    "why you cannot answer it instead of guessing."
)
ENGLISH_CLAUSE = "Respond only in English, even if the conversation drifts into another language."

MANDATED_DIRECTIVES = (PERSONA_CLAUSE, CBT_CLAUSE, REFUSAL_CLAUSE)

ASSISTANT_NAME = "Em"


class LlmError(Exception):
    pass


class LlmUnavailable(LlmError):
    """Endpoint unreachable or kept failing after all retries."""


class LlmRejected(LlmError):
    """Endpoint answered with a 4xx or an unusable completion payload."""


class LlmTimeout(LlmError):
    pass


class SessionError(Exception):
    pass


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str
    model: str
    api_key: str | None = field(default=None, repr=False)
    timeout_s: float = 60.0
    max_retries: int = 2
    temperature: float = 0.7
    backoff_base_s: float = 0.5


@dataclass(frozen=True)
class PromptContext:
    """Everything the system prompt is rendered from."""

    user_name: str
    summary: StressSummary
    persona_directives: tuple[str, ...] = MANDATED_DIRECTIVES
    locale: str = "en"

    def __post_init__(self):
        for clause in MANDATED_DIRECTIVES:
            if clause not in self.persona_directives:
                raise ValueError("persona directives must include the mandated clauses")


def _hms(seconds: float) -> str:
    s = int(round(seconds))
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"


def _display_name(user_name: str, fallback: str) -> str:
    return user_name.strip() or fallback


def stress_clause(ctx: PromptContext) -> str:
    """The injected psycho-physiological report, rendered deterministically."""
    name = _display_name(ctx.user_name, "the user")
    s = ctx.summary
    if s.windows_total == 0:
        return f"Stress report for {name}: no physiological data was recorded today."
    pct = f"{s.stressed_fraction * 100:.1f}%"
    n = len(s.episodes)
    if n == 0:
        ep = "no sustained stress episodes"
    else:
        times = "; ".join(f"{_hms(a)}-{_hms(b)}" for a, b in s.episodes)
        noun = "stress episode" if n == 1 else "stress episodes"
        ep = f"{n} {noun} ({times})"
    return (
        f"Stress report for {name}: the wearable classified {pct} of today's "
        f"monitored windows as stressed, with {ep}. Use this report with care "
        "when responding; the user may perceive their day differently."
    )


def build_system_prompt(ctx: PromptContext) -> str:
    """Deterministic persona prompt: psychologist, CBT, refusal-explanation,
    stress injection, English-only, in that order."""
    return "\n\n".join([*ctx.persona_directives, stress_clause(ctx), ENGLISH_CLAUSE])


def greeting(ctx: PromptContext) -> str:
    """Locally templated opening message; never depends on the LLM."""
    name = _display_name(ctx.user_name, "there")
    s = ctx.summary
    intro = (
        f"Hi {name}! I'm {ASSISTANT_NAME}, a companion chatbot that follows the "
        "stress signals from your wearable through the day."
    )
    if s.windows_total == 0:
        status = "I didn't receive any physiological data from your wearable today."
    elif len(s.episodes) > 0:
        n = len(s.episodes)
        noun = "stress episode" if n == 1 else "stress episodes"
        status = (
            f"Today I detected {n} {noun}; overall "
            f"{s.stressed_fraction * 100:.1f}% of your monitored time looked stressed."
        )
    else:
        status = "I didn't detect any sustained stress in your data today."
    return f"{intro} {status} Would you like to talk about your day?"


# ---------------------------------------------------------------------------
# sessions


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    text: str
    ts: float


@dataclass(frozen=True)
class SessionRating:
    quality: int
    empathy: int
    comment: str = ""


@dataclass
class ChatSession:
    """Append-only message log; the event list is the source of truth."""

    session_id: str
    created_at: float
    context: PromptContext
    events: list[dict] = field(default_factory=list)
    truncated: bool = field(default=False, compare=False)
    _persisted: int = field(default=0, compare=False, repr=False)

    @property
    def messages(self) -> list[ChatMessage]:
        return [
            ChatMessage(e["role"], e["text"], e["ts"])
            for e in self.events
            if e["event"] == "message"
        ]

    @property
    def rating(self) -> SessionRating | None:
        for e in reversed(self.events):
            if e["event"] == "rating":
                return SessionRating(e["quality"], e["empathy"], e["comment"])
        return None

    @property
    def last_send_failed(self) -> bool:
        for e in reversed(self.events):
            if e["event"] == "pending_failure":
                return True
            if e["event"] == "message":
                return False
        return False

    def _check_turn(self, role: str) -> None:
        msgs = self.messages
        if not msgs:
            if role != "system":
                raise SessionError("first message must be the system prompt")
            return
        if msgs[-1].role == "system" and role != "assistant":
            raise SessionError("the greeting must follow the system prompt")
        if msgs[-1].role == "user" and role == "user" and not self.last_send_failed:
            raise SessionError("roles must alternate after the greeting")

    def append_message(self, role: str, text: str, ts: float) -> None:
        self._check_turn(role)
        self.events.append({"event": "message", "role": role, "text": text, "ts": ts})

    def record_failure(self, error: str, ts: float) -> None:
        self.events.append({"event": "pending_failure", "error": error, "ts": ts})

    def record_rating(self, rating: SessionRating, ts: float) -> None:
        for v in (rating.quality, rating.empathy):
            if not 1 <= v <= 5:
                raise SessionError("ratings must be between 1 and 5")
        self.events.append(
            {
                "event": "rating",
                "quality": rating.quality,
                "empathy": rating.empathy,
                "comment": rating.comment,
                "ts": ts,
            }
        )

    def completion_payload(self) -> list[dict]:
        """Full history for the chat-completion request, system prompt first."""
        return [{"role": m.role, "content": m.text} for m in self.messages]

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "user_name": self.context.user_name,
            "locale": self.context.locale,
            "summary": self.context.summary.to_dict(),
            "messages": [{"role": m.role, "text": m.text, "ts": m.ts} for m in self.messages],
            "rating": (
                {
                    "quality": self.rating.quality,
                    "empathy": self.rating.empathy,
                    "comment": self.rating.comment,
                }
                if self.rating
                else None
            ),
            "last_send_failed": self.last_send_failed,
            "truncated": self.truncated,
        }


def new_session(user_name: str, summary: StressSummary, now: Callable[[], float] = time.time) -> ChatSession:
    """Create a session: system prompt plus the templated greeting."""
    ctx = PromptContext(user_name=user_name, summary=summary.public())
    session = ChatSession(
        session_id=uuid.uuid4().hex,
        created_at=now(),
        context=ctx,
    )
    session.events.append(
        {
            "event": "created",
            "session_id": session.session_id,
            "created_at": session.created_at,
            "user_name": ctx.user_name,
            "locale": ctx.locale,
            "summary": ctx.summary.to_dict(),
        }
    )
    ts = now()
    session.append_message("system", build_system_prompt(ctx), ts)
    session.append_message("assistant", greeting(ctx), now())
    return session


class SessionStore:
    """One JSONL file per session under a data directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not session_id.isalnum():
            raise SessionError(f"invalid session id: {session_id}")
        return self.root / f"{session_id}.jsonl"

    def persist(self, session: ChatSession) -> None:
        """Append any events not yet on disk."""
        pending = session.events[session._persisted :]
        if not pending:
            return
        with open(self._path(session.session_id), "a") as fh:
            for event in pending:
                fh.write(json.dumps(event) + "\n")
        session._persisted = len(session.events)

    def load(self, session_id: str) -> ChatSession:
        """Replay a session log; a corrupt trailing line truncates with a warning."""
        path = self._path(session_id)
        if not path.is_file():
            raise SessionError(f"no such session: {session_id}")
        events: list[dict] = []
        truncated = False
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError:
                    truncated = True
                    break
        if not events or events[0].get("event") != "created":
            raise SessionError(f"session log for {session_id} has no creation event")
        head = events[0]
        ctx = PromptContext(
            user_name=head["user_name"],
            summary=StressSummary.from_dict(head["summary"]),
            locale=head.get("locale", "en"),
        )
        session = ChatSession(
            session_id=head["session_id"],
            created_at=head["created_at"],
            context=ctx,
            events=events,
            truncated=truncated,
        )
        session._persisted = len(events)
        return session

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))


# ---------------------------------------------------------------------------
# LLM client


class LlmClient:
    """Provider-agnostic chat-completion client with capped exponential backoff."""

    def __init__(
        self,
        cfg: LlmEndpointConfig,
        http: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self._http = http or requests.Session()
        self._sleep = sleep

    def complete(self, messages: Sequence[dict]) -> str:
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.cfg.model,
            "messages": list(messages),
            "temperature": self.cfg.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key:
            headers["Authorization"] = f"Bearer {self.cfg.api_key}"
        attempts = self.cfg.max_retries + 1
        error: LlmError = LlmUnavailable("no attempt made")
        for attempt in range(attempts):
            try:
                resp = self._http.post(url, json=body, headers=headers, timeout=self.cfg.timeout_s)
            except requests.Timeout:
                error = LlmTimeout(f"no response within {self.cfg.timeout_s} s")
            except requests.RequestException as exc:
                error = LlmUnavailable(str(exc))
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError):
                        raise LlmRejected("endpoint returned an unusable completion payload")
                if 400 <= resp.status_code < 500:
                    raise LlmRejected(f"endpoint rejected the request: HTTP {resp.status_code}")
                error = LlmUnavailable(f"HTTP {resp.status_code}")
            if attempt < attempts - 1:
                self._sleep(self.cfg.backoff_base_s * (2**attempt))
        raise error


def send_message(
    session: ChatSession,
    user_text: str,
    llm: LlmEndpointConfig,
    store: SessionStore,
    client: LlmClient | None = None,
    now: Callable[[], float] = time.time,
) -> str:
    """Append the user message, call the LLM with the full history, append
    the reply. On failure the user message stays, marked pending-failure."""
    if not user_text.strip():
        raise SessionError("message text must not be empty")
    client = client or LlmClient(llm)
    session.append_message("user", user_text, now())
    store.persist(session)
    try:
        reply = client.complete(session.completion_payload())
    except LlmError as exc:
        session.record_failure(str(exc), now())
        store.persist(session)
        raise
    session.append_message("assistant", reply, now())
    store.persist(session)
    return reply

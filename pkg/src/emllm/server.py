"""HTTP API tying the monitor and the chat layer together.

Routes (JSON in/out):

    GET  /api/health                      liveness probe
    POST /api/session {user_name}         -> {session_id, greeting}
    GET  /api/session/{id}                full session, key-redacted
    POST /api/session/{id}/message {text} -> {assistant_text}
    POST /api/session/{id}/rating         -> 204
    POST /api/signals/push                -> {accepted}
    GET  /api/stress/summary              -> StressSummary

Sessions are isolated by per-session locks; the monitor serializes pushes
and ticks internally. Stress values shown anywhere come straight from the
monitor's summary, never recomputed here.
"""

from __future__ import annotations

import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .chat import (
    ChatSession,
    LlmClient,
    LlmEndpointConfig,
    LlmError,
    LlmRejected,
    LlmTimeout,
    LlmUnavailable,
    SessionError,
    SessionRating,
    SessionStore,
    new_session,
    send_message,
)
from .model import load_model
from .monitor import MonitorError, OutOfOrder, StressMonitor, UnknownChannel


@dataclass
class ServerConfig:
    model_path: str
    data_dir: str
    llm: LlmEndpointConfig
    shift_s: float = 5.0
    min_episode_windows: int = 3
    static_dir: str | None = None


class SessionCreate(BaseModel):
    user_name: str


class MessageIn(BaseModel):
    text: str = Field(min_length=1)


class RatingIn(BaseModel):
    quality: int = Field(ge=1, le=5)
    empathy: int = Field(ge=1, le=5)
    comment: str = ""


class SignalsPush(BaseModel):
    channel: str
    samples: list[tuple[float, float]]


class _Runtime:
    """Mutable service state shared by the route handlers."""

    def __init__(self, config: ServerConfig, monitor: StressMonitor, store: SessionStore,
                 client: LlmClient | None = None):
        self.config = config
        self.monitor = monitor
        self.store = store
        self.client = client or LlmClient(config.llm)
        self.sessions: dict[str, ChatSession] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def get_session(self, session_id: str) -> tuple[ChatSession, threading.Lock]:
        with self._registry_lock:
            if session_id not in self.sessions:
                self.sessions[session_id] = self.store.load(session_id)
                self.locks[session_id] = threading.Lock()
            return self.sessions[session_id], self.locks[session_id]

    def register(self, session: ChatSession) -> None:
        with self._registry_lock:
            self.sessions[session.session_id] = session
            self.locks[session.session_id] = threading.Lock()

    def flush(self) -> None:
        with self._registry_lock:
            for session in self.sessions.values():
                self.store.persist(session)


def create_app(
    config: ServerConfig,
    monitor: StressMonitor | None = None,
    store: SessionStore | None = None,
    client: LlmClient | None = None,
) -> FastAPI:
    if monitor is None:
        params = load_model(config.model_path)
        monitor = StressMonitor(
            params,
            shift_s=config.shift_s,
            min_episode_windows=config.min_episode_windows,
        )
    if store is None:
        store = SessionStore(config.data_dir)
    rt = _Runtime(config, monitor, store, client)

    @asynccontextmanager
    async def lifespan(_):
        yield
        rt.flush()  # graceful shutdown leaves every session on disk

    app = FastAPI(title="emllm", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.runtime = rt

    @app.exception_handler(MonitorError)
    def _monitor_error(_, exc: MonitorError):
        if isinstance(exc, OutOfOrder):
            return JSONResponse(status_code=409, content={"error": "OutOfOrder", "detail": str(exc)})
        if isinstance(exc, UnknownChannel):
            return JSONResponse(status_code=404, content={"error": "UnknownChannel", "detail": str(exc)})
        return JSONResponse(status_code=400, content={"error": "MonitorError", "detail": str(exc)})

    @app.exception_handler(LlmError)
    def _llm_error(_, exc: LlmError):
        status = 503 if isinstance(exc, LlmUnavailable) else 504 if isinstance(exc, LlmTimeout) else 502
        name = type(exc).__name__
        return JSONResponse(status_code=status, content={"error": name, "detail": str(exc)})

    @app.exception_handler(SessionError)
    def _session_error(_, exc: SessionError):
        code = 404 if "no such session" in str(exc) else 400
        return JSONResponse(status_code=code, content={"error": "SessionError", "detail": str(exc)})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/session")
    def create_session(body: SessionCreate):
        rt.monitor.tick()
        session = new_session(body.user_name, rt.monitor.summary())
        rt.store.persist(session)
        rt.register(session)
        return {"session_id": session.session_id, "greeting": session.messages[-1].text}

    @app.get("/api/session/{session_id}")
    def get_session(session_id: str):
        session, _ = rt.get_session(session_id)
        return session.to_dict()

    @app.post("/api/session/{session_id}/message")
    def post_message(session_id: str, body: MessageIn):
        session, lock = rt.get_session(session_id)
        with lock:
            reply = send_message(session, body.text, rt.config.llm, rt.store, client=rt.client)
        return {"assistant_text": reply}

    @app.post("/api/session/{session_id}/rating", status_code=204)
    def post_rating(session_id: str, body: RatingIn):
        session, lock = rt.get_session(session_id)
        with lock:
            session.record_rating(
                SessionRating(body.quality, body.empathy, body.comment), time.time()
            )
            rt.store.persist(session)
        return Response(status_code=204)

    @app.post("/api/signals/push")
    def push_signals(body: SignalsPush):
        accepted = rt.monitor.push_samples(body.channel, body.samples)
        return {"accepted": accepted}

    @app.get("/api/stress/summary")
    def stress_summary():
        rt.monitor.tick()
        return rt.monitor.summary().to_dict()

    if config.static_dir and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def serve_api(config: ServerConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the service until SIGTERM/SIGINT; returns after a clean shutdown.

    uvicorn re-raises captured signals after its own graceful shutdown,
    which would surface as a signal death; running the server loop off the
    main thread keeps the flush-then-exit-0 contract.
    """
    import signal

    import uvicorn

    server = uvicorn.Server(uvicorn.Config(create_app(config), host=host, port=port,
                                           log_level="info"))
    failures: list[BaseException] = []

    def _run():
        try:
            server.run()
        except BaseException as exc:  # surfaced to the main thread below
            failures.append(exc)

    stop = threading.Event()
    for sig in (signal.SIGTERM, signal.SIGINT):
        signal.signal(sig, lambda *_: stop.set())
    worker = threading.Thread(target=_run)
    worker.start()
    while worker.is_alive() and not stop.wait(timeout=0.2):
        pass
    server.should_exit = True
    worker.join(timeout=30)
    if failures:
        exc = failures[0]
        if isinstance(exc, SystemExit):
            raise OSError(f"server exited during startup (code {exc.code})")
        raise exc

"""Shared test utilities: hand-rolled oracles, dataset builders, a mock LLM."""

from __future__ import annotations

import http.server
import json
import threading
from pathlib import Path

import numpy as np


# ---------------------------------------------------------------------------
# brute-force oracles (kept deliberately naive and independent of emllm.nn)


def conv1d_oracle(x, w, b, stride):
    c_in, length = x.shape
    c_out, _, k = w.shape
    l_out = (length - k) // stride + 1
    y = np.empty((c_out, l_out))
    for o in range(c_out):
        for j in range(l_out):
            acc = b[o]
            for i in range(c_in):
                for t in range(k):
                    acc = acc + w[o, i, t] * x[i, j * stride + t]
            y[o, j] = acc
    return y


def maxpool_oracle(x, size, stride):
    c, length = x.shape
    l_out = (length - size) // stride + 1
    y = np.empty((c, l_out))
    arg = np.empty((c, l_out), dtype=np.int64)
    for i in range(c):
        for j in range(l_out):
            best = x[i, j * stride]
            best_at = j * stride
            for t in range(1, size):
                if x[i, j * stride + t] > best:
                    best = x[i, j * stride + t]
                    best_at = j * stride + t
            y[i, j] = best
            arg[i, j] = best_at
    return y, arg


def dense_oracle(x, w, b):
    m, n = w.shape
    y = np.empty(m)
    for o in range(m):
        acc = b[o]
        for j in range(n):
            acc = acc + w[o, j] * x[j]
        y[o] = acc
    return y


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def finite_diff_grads(params, window, target, h=1e-5):
    """Central differences of the actually-computed loss, parameter by parameter."""
    from emllm import nn
    from emllm.model import forward

    fd = {}
    for name, tensor in params.tensors.items():
        grad = np.zeros_like(tensor)
        flat, gflat = tensor.ravel(), grad.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            lp, _ = nn.bce_loss(forward(params, window), target)
            flat[idx] = orig - h
            lm, _ = nn.bce_loss(forward(params, window), target)
            flat[idx] = orig
            gflat[idx] = (lp - lm) / (2.0 * h)
        fd[name] = grad
    return fd


def net_is_fd_safe(cache, arch, margin=1e-3):
    """Reject configurations where finite differences would cross a kink:
    ReLU inputs near zero, near-tied pool maxima, or a saturated output."""
    if not margin < cache["p"] < 1.0 - margin:
        return False
    if np.min(np.abs(cache["u"])) < margin:
        return False
    size, stride = arch.pool_size, arch.pool_stride
    for cc in cache["channels"].values():
        for _, pre in cc["layers"]:
            if np.min(np.abs(pre)) < margin:
                return False
        if size < 2:
            continue
        act = cc["last_act"]
        for c in range(act.shape[0]):
            for j in range(cc["arg"].shape[1]):
                vals = np.sort(act[c, j * stride : j * stride + size])
                if vals[-1] - vals[-2] < margin:
                    return False
    return True


def max_rel_error(analytic, numeric, guard=1e-6):
    worst = 0.0
    for name in analytic:
        a, b = analytic[name].ravel(), numeric[name].ravel()
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), guard)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


# ---------------------------------------------------------------------------
# dataset directory builder


def write_recording(
    dir_path: Path,
    channels: dict[str, tuple[float, list[float]]],
    labels: list[tuple[float, float, int]],
    subject_id: str = "sx",
    t0: float = 0.0,
    labels_header: str = "t_start_s,t_end_s,condition",
) -> Path:
    """Write a recording directory from raw values at declared rates."""
    dir_path.mkdir(parents=True, exist_ok=True)
    meta = {"subject_id": subject_id, "channels": [], "labels_file": "labels.csv"}
    for name, (rate, values) in channels.items():
        fname = f"{name}.csv"
        meta["channels"].append({"name": name, "rate_hz": rate, "file": fname})
        lines = ["t_s,value"]
        lines += [f"{t0 + k / rate!r},{float(v)!r}" for k, v in enumerate(values)]
        (dir_path / fname).write_text("\n".join(lines) + "\n")
    lines = [labels_header]
    lines += [f"{s!r},{e!r},{c}" for s, e, c in labels]
    (dir_path / "labels.csv").write_text("\n".join(lines) + "\n")
    (dir_path / "meta.json").write_text(json.dumps(meta))
    return dir_path


def condition_at(labels: list[tuple[float, float, int]], t: float) -> int | None:
    for s, e, c in labels:
        if s <= t < e:
            return c
    return None


# ---------------------------------------------------------------------------
# scripted mock LLM endpoint


class _MockLlmHandler(http.server.BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        owner = self.server.owner
        with owner.lock:
            owner.requests.append(
                {"path": self.path, "body": body, "headers": dict(self.headers)}
            )
            status = owner.script.pop(0) if owner.script else 200
        if status != 200:
            self.send_response(status)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        reply = owner.reply(body)
        payload = json.dumps({"choices": [{"message": {"content": reply}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


class MockLlm:
    """Tiny chat-completions endpoint with a scriptable status sequence."""

    def __init__(self, script: list[int] | None = None, reply_text: str = "ok"):
        self.script = list(script or [])
        self.reply_text = reply_text
        self.requests: list[dict] = []
        self.lock = threading.Lock()
        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _MockLlmHandler)
        self._server.owner = self
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def reply(self, body: bytes) -> str:
        return self.reply_text

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def start(self) -> "MockLlm":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    @property
    def request_count(self) -> int:
        with self.lock:
            return len(self.requests)

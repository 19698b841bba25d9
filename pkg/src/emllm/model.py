"""Multi-channel 1D CNN stress classifier: build, train, evaluate, serialize.

Each channel runs through its own stack of three kernel-3 convolutions
(ReLU after each) whose first stride absorbs the channel's sampling-rate
ratio, so all channels reach comparable temporal resolution before the
pooled features are flattened, concatenated, and classified by a small
fully connected head with a single sigmoid output ("stressed" is the
positive class).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import nn
from .dataset import LabeledWindow, NormStats, fit_norm_stats
from .dataset import normalize as normalize_window

FORMAT_VERSION = 1
DEFAULT_THRESHOLD = 0.5
DEFAULT_FILTERS = (16, 32, 64)


class ModelError(Exception):
    pass


class WindowTooShort(ModelError):
    """The stride pyramid consumes more samples than the window provides."""


class UnsupportedVersion(ModelError):
    pass


class ShapeMismatch(ModelError):
    pass


class SingleClassData(ModelError):
    pass


class TrainingDiverged(ModelError):
    pass


@dataclass(frozen=True)
class ChannelArch:
    """Conv stack description for one input channel."""

    name: str
    rate_hz: float
    strides: tuple[int, int, int]
    filters: tuple[int, int, int] = DEFAULT_FILTERS
    kernel: int = 3


@dataclass(frozen=True)
class ArchConfig:
    channels: tuple[ChannelArch, ...]
    pool_size: int = 4
    pool_stride: int = 4
    hidden_units: int = 128

    def __post_init__(self):
        if not self.channels:
            raise ModelError("architecture needs at least one channel")
        min_rate = min(ch.rate_hz for ch in self.channels)
        for ch in self.channels:
            if ch.kernel != 3:
                raise ModelError(f"{ch.name}: kernel size must be 3")
            if len(ch.strides) != 3 or len(ch.filters) != 3:
                raise ModelError(f"{ch.name}: exactly three conv layers required")
            want = max(1, round(ch.rate_hz / min_rate))
            if ch.strides[0] != want:
                raise ModelError(
                    f"{ch.name}: first-layer stride {ch.strides[0]} must equal "
                    f"rate ratio {want}"
                )
            if ch.strides[1] != 2 or ch.strides[2] != 2:
                raise ModelError(f"{ch.name}: deeper layers use stride 2")

    @classmethod
    def from_rates(
        cls,
        rates: Mapping[str, float],
        filters: tuple[int, int, int] = DEFAULT_FILTERS,
        pool_size: int = 4,
        pool_stride: int = 4,
        hidden_units: int = 128,
    ) -> "ArchConfig":
        """Derive the stride schedule from the channels' sampling rates."""
        min_rate = min(rates.values())
        channels = tuple(
            ChannelArch(
                name=name,
                rate_hz=float(rate),
                strides=(max(1, round(rate / min_rate)), 2, 2),
                filters=filters,
            )
            for name, rate in sorted(rates.items())
        )
        return cls(
            channels=channels,
            pool_size=pool_size,
            pool_stride=pool_stride,
            hidden_units=hidden_units,
        )

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(ch.name for ch in self.channels)

    def to_dict(self) -> dict:
        return {
            "channels": [
                {
                    "name": ch.name,
                    "rate_hz": ch.rate_hz,
                    "strides": list(ch.strides),
                    "filters": list(ch.filters),
                    "kernel": ch.kernel,
                }
                for ch in self.channels
            ],
            "pool_size": self.pool_size,
            "pool_stride": self.pool_stride,
            "hidden_units": self.hidden_units,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ArchConfig":
        channels = tuple(
            ChannelArch(
                name=str(c["name"]),
                rate_hz=float(c["rate_hz"]),
                strides=tuple(int(s) for s in c["strides"]),
                filters=tuple(int(f) for f in c["filters"]),
                kernel=int(c["kernel"]),
            )
            for c in d["channels"]
        )
        return cls(
            channels=channels,
            pool_size=int(d["pool_size"]),
            pool_stride=int(d["pool_stride"]),
            hidden_units=int(d["hidden_units"]),
        )


def _conv_out(length: int, kernel: int, stride: int) -> int:
    return (length - kernel) // stride + 1


def window_samples(ch: ChannelArch, window_s: float) -> int:
    n = window_s * ch.rate_hz
    if abs(n - round(n)) > 1e-9:
        raise ModelError(f"{ch.name}: window of {window_s} s is not a whole number of samples")
    return int(round(n))


def stack_lengths(arch: ArchConfig, ch: ChannelArch, window_s: float) -> tuple[int, int, int, int]:
    """Feature-map lengths after conv1..3 and the pool, per the output-length law."""
    length = window_samples(ch, window_s)
    out = []
    for stride in ch.strides:
        if length < ch.kernel:
            raise WindowTooShort(
                f"{ch.name}: length {length} below kernel {ch.kernel} in the stride pyramid"
            )
        length = _conv_out(length, ch.kernel, stride)
        out.append(length)
    if length < arch.pool_size:
        raise WindowTooShort(f"{ch.name}: length {length} below pool size {arch.pool_size}")
    out.append(_conv_out(length, arch.pool_size, arch.pool_stride))
    return tuple(out)


def expected_shapes(arch: ArchConfig, window_s: float) -> dict[str, tuple[int, ...]]:
    """Every tensor's shape, derived from the architecture and window length."""
    shapes: dict[str, tuple[int, ...]] = {}
    concat = 0
    for ch in arch.channels:
        lengths = stack_lengths(arch, ch, window_s)
        in_c = 1
        for i, f in enumerate(ch.filters, start=1):
            shapes[f"{ch.name}.conv{i}.w"] = (f, in_c, ch.kernel)
            shapes[f"{ch.name}.conv{i}.b"] = (f,)
            in_c = f
        concat += ch.filters[-1] * lengths[-1]
    shapes["head.hidden.w"] = (arch.hidden_units, concat)
    shapes["head.hidden.b"] = (arch.hidden_units,)
    shapes["head.out.w"] = (1, arch.hidden_units)
    shapes["head.out.b"] = (1,)
    return shapes


def head_input_size(arch: ArchConfig, window_s: float) -> int:
    return expected_shapes(arch, window_s)["head.hidden.w"][1]


@dataclass
class StressNetParams:
    """All weights plus the metadata needed to run them on raw windows."""

    arch: ArchConfig
    window_s: float
    norm_stats: NormStats
    tensors: dict[str, np.ndarray]
    format_version: int = FORMAT_VERSION

    def copy_tensors(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.tensors.items()}


def build_network(
    arch: ArchConfig,
    window_s: float,
    seed: int = 0,
    norm_stats: NormStats | None = None,
    rng: nn.Xoshiro256 | None = None,
) -> StressNetParams:
    """Initialize all tensors (fan-in scaled uniform, seeded) and record shapes."""
    shapes = expected_shapes(arch, window_s)
    if rng is None:
        rng = nn.Xoshiro256(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = nn.kaiming_uniform(rng, shape, fan_in)
            tensors[name.removesuffix(".w") + ".b"] = nn.bias_uniform(rng, shape[0], fan_in)
    if norm_stats is None:
        norm_stats = NormStats.identity(arch.channel_names)
    return StressNetParams(
        arch=arch, window_s=window_s, norm_stats=norm_stats, tensors=tensors
    )


def _channel_input(params: StressNetParams, window: LabeledWindow, ch: ChannelArch) -> np.ndarray:
    if ch.name not in window.per_channel:
        raise ShapeMismatch(f"window missing channel {ch.name}")
    vec = np.asarray(window.per_channel[ch.name], dtype=np.float64)
    want = window_samples(ch, params.window_s)
    if vec.shape != (want,):
        raise ShapeMismatch(f"{ch.name}: expected {want} samples, got {vec.shape}")
    return vec.reshape(1, -1)


def _forward_cached(params: StressNetParams, window: LabeledWindow):
    t = params.tensors
    arch = params.arch
    cache: dict = {"channels": {}}
    feats = []
    for ch in arch.channels:
        x = _channel_input(params, window, ch)
        layers = []
        cur = x
        for i, stride in enumerate(ch.strides, start=1):
            pre = nn.conv1d_forward(cur, t[f"{ch.name}.conv{i}.w"], t[f"{ch.name}.conv{i}.b"], stride)
            act = nn.relu(pre)
            layers.append((cur, pre))
            cur = act
        pooled, arg = nn.maxpool1d(cur, arch.pool_size, arch.pool_stride)
        cache["channels"][ch.name] = {
            "layers": layers,
            "last_act": cur,
            "arg": arg,
            "pooled_shape": pooled.shape,
        }
        feats.append(pooled.ravel())
    h = np.concatenate(feats)
    u = nn.dense_forward(h, t["head.hidden.w"], t["head.hidden.b"])
    r = nn.relu(u)
    o = nn.dense_forward(r, t["head.out.w"], t["head.out.b"])
    p = float(nn.sigmoid(o[0]))
    cache.update({"h": h, "u": u, "r": r, "p": p})
    return p, cache


def forward(params: StressNetParams, window: LabeledWindow) -> float:
    """Probability of "stressed" for an already-normalized window."""
    p, _ = _forward_cached(params, window)
    return p


def predict_proba(params: StressNetParams, window: LabeledWindow) -> float:
    """Apply the embedded normalization stats, then forward."""
    return forward(params, normalize_window(window, params.norm_stats))


def backward(params: StressNetParams, cache: dict, target: int) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients for one cached forward pass."""
    t = params.tensors
    arch = params.arch
    if not isinstance(cache, dict) or "p" not in cache or "channels" not in cache:
        raise ModelError("missing forward cache; run the cached forward pass first")
    p = cache["p"]
    loss, dldp = nn.bce_loss(p, target)
    go = np.array([dldp * p * (1.0 - p)])
    grads: dict[str, np.ndarray] = {}
    gr, grads["head.out.w"], grads["head.out.b"] = nn.dense_backward(
        cache["r"], t["head.out.w"], go
    )
    gu = nn.relu_backward(cache["u"], gr)
    gh, grads["head.hidden.w"], grads["head.hidden.b"] = nn.dense_backward(
        cache["h"], t["head.hidden.w"], gu
    )
    offset = 0
    for ch in arch.channels:
        cc = cache["channels"][ch.name]
        c_out, l_pool = cc["pooled_shape"]
        size = c_out * l_pool
        g_pool = gh[offset : offset + size].reshape(c_out, l_pool)
        offset += size
        g = nn.maxpool1d_backward(cc["arg"], g_pool, cc["last_act"].shape[1])
        for i in range(len(ch.strides), 0, -1):
            cur, pre = cc["layers"][i - 1]
            g = nn.relu_backward(pre, g)
            g, grads[f"{ch.name}.conv{i}.w"], grads[f"{ch.name}.conv{i}.b"] = nn.conv1d_backward(
                cur, t[f"{ch.name}.conv{i}.w"], ch.strides[i - 1], g
            )
    return loss, grads


def batch_loss_and_grads(
    params: StressNetParams, batch: Sequence[LabeledWindow]
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean BCE and gradients, accumulated in fixed sample order."""
    total: dict[str, np.ndarray] = {}
    loss_sum = 0.0
    for window in batch:
        p, cache = _forward_cached(params, window)
        loss, grads = backward(params, cache, window.label)
        loss_sum += loss
        for name, g in grads.items():
            if name in total:
                total[name] += g
            else:
                total[name] = g
    inv = 1.0 / len(batch)
    for name in total:
        total[name] *= inv
    return loss_sum * inv, total


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int = 5
    val_fraction: float = 0.2
    normalize: bool = True
    threshold: float = DEFAULT_THRESHOLD


@dataclass
class TrainResult:
    params: StressNetParams
    history: list[dict]
    val_report: "EvalReport | None"
    n_train: int
    n_val: int
    val_subjects: tuple[str, ...]


def _split_train_val(
    windows: list[LabeledWindow], frac: float, rng: nn.Xoshiro256
) -> tuple[list[LabeledWindow], list[LabeledWindow], tuple[str, ...]]:
    """Hold out ~frac of the windows for validation.

    With three or more subjects the split is grouped by subject so that
    overlapping windows from one recording never straddle the split.
    """
    n = len(windows)
    subjects = sorted({w.subject_id for w in windows})
    if len(subjects) >= 3:
        order = list(subjects)
        rng.shuffle(order)
        val_subjects: set[str] = set()
        count = 0
        for sid in order:
            if count >= frac * n or len(val_subjects) == len(subjects) - 1:
                break
            val_subjects.add(sid)
            count += sum(1 for w in windows if w.subject_id == sid)
        train = [w for w in windows if w.subject_id not in val_subjects]
        val = [w for w in windows if w.subject_id in val_subjects]
        if {w.label for w in train} == {0, 1}:
            return train, val, tuple(sorted(val_subjects))
        # grouped split starved the training side of a class; fall through
    index = list(range(n))
    rng.shuffle(index)
    n_val = max(1, round(frac * n)) if n >= 2 else 0
    val_idx = set(index[:n_val])
    train = [w for i, w in enumerate(windows) if i not in val_idx]
    val = [w for i, w in enumerate(windows) if i in val_idx]
    return train, val, ()


def infer_window_s(windows: Sequence[LabeledWindow], arch: ArchConfig) -> float:
    ch = arch.channels[0]
    return len(windows[0].per_channel[ch.name]) / ch.rate_hz


def train(
    windows: Iterable[LabeledWindow],
    arch: ArchConfig,
    cfg: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Mini-batch Adam training with per-epoch seeded shuffling.

    Carves a validation split out of the given windows, z-scores from the
    training side only, and returns the parameters of the best validation
    epoch (early stop after `patience` epochs without improvement).
    """
    windows = list(windows)
    if not windows:
        raise ModelError("no training windows")
    if {w.label for w in windows} != {0, 1}:
        raise SingleClassData("training data must contain both classes")
    window_s = infer_window_s(windows, arch)

    rng = nn.Xoshiro256(cfg.seed)
    train_wins, val_wins, val_subjects = _split_train_val(windows, cfg.val_fraction, rng)
    if cfg.normalize:
        stats = fit_norm_stats(train_wins)
    else:
        stats = NormStats.identity(arch.channel_names)
    norm_train = [normalize_window(w, stats) for w in train_wins]
    norm_val = [normalize_window(w, stats) for w in val_wins]

    params = build_network(arch, window_s, norm_stats=stats, rng=rng)
    state = nn.AdamState(lr=cfg.lr)
    history: list[dict] = []
    best_loss = math.inf
    best_tensors = params.copy_tensors()
    stale = 0

    order = list(range(len(norm_train)))
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        running = 0.0
        for at in range(0, len(order), cfg.batch_size):
            batch = [norm_train[i] for i in order[at : at + cfg.batch_size]]
            loss, grads = batch_loss_and_grads(params, batch)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
            nn.adam_step(params.tensors, grads, state)
            running += loss * len(batch)
        train_loss = running / len(norm_train)
        val_loss = _mean_loss(params, norm_val) if norm_val else train_loss
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_loss:
            best_loss = val_loss
            best_tensors = params.copy_tensors()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    params.tensors = best_tensors

    val_report = (
        evaluate(params, val_wins, threshold=cfg.threshold, split="validation")
        if val_wins
        else None
    )
    return TrainResult(
        params=params,
        history=history,
        val_report=val_report,
        n_train=len(train_wins),
        n_val=len(val_wins),
        val_subjects=val_subjects,
    )


def _mean_loss(params: StressNetParams, windows: Sequence[LabeledWindow]) -> float:
    total = 0.0
    for w in windows:
        loss, _ = nn.bce_loss(forward(params, w), w.label)
        total += loss
    return total / len(windows)


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    split: str = ""

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int, split: str = "") -> "EvalReport":
        total = tp + fp + fn + tn
        if total == 0:
            raise ModelError("cannot evaluate on an empty window set")
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(
            accuracy=(tp + tn) / total,
            precision=precision,
            recall=recall,
            f1=f1,
            tp=tp,
            fp=fp,
            fn=fn,
            tn=tn,
            split=split,
        )

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }


def evaluate(
    params: StressNetParams,
    windows: Iterable[LabeledWindow],
    threshold: float = DEFAULT_THRESHOLD,
    split: str = "",
) -> EvalReport:
    """Threshold the stressed-probability and tally the confusion counts."""
    tp = fp = fn = tn = 0
    for window in windows:
        predicted = 1 if predict_proba(params, window) >= threshold else 0
        if window.label == 1:
            tp, fn = (tp + 1, fn) if predicted == 1 else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if predicted == 1 else (fp, tn + 1)
    return EvalReport.from_counts(tp, fp, fn, tn, split=split)


@dataclass
class LosoResult:
    per_subject: dict[str, EvalReport]
    pooled: EvalReport


def evaluate_loso(
    windows: Iterable[LabeledWindow],
    arch: ArchConfig,
    cfg: TrainConfig = TrainConfig(),
) -> LosoResult:
    """Leave-one-subject-out: train on the rest, test on the held-out subject."""
    by_subject: dict[str, list[LabeledWindow]] = {}
    for w in windows:
        by_subject.setdefault(w.subject_id, []).append(w)
    if len(by_subject) < 2:
        raise ModelError("leave-one-subject-out needs at least two subjects")
    for sid, wins in by_subject.items():
        if not wins:
            raise ModelError(f"subject {sid} has zero windows")
    per_subject: dict[str, EvalReport] = {}
    counts = [0, 0, 0, 0]
    for sid in sorted(by_subject):
        rest = [w for other, wins in by_subject.items() if other != sid for w in wins]
        result = train(rest, arch, cfg)
        report = evaluate(result.params, by_subject[sid], threshold=cfg.threshold, split=f"loso:{sid}")
        per_subject[sid] = report
        counts[0] += report.tp
        counts[1] += report.fp
        counts[2] += report.fn
        counts[3] += report.tn
    pooled = EvalReport.from_counts(*counts, split="loso-pooled")
    return LosoResult(per_subject=per_subject, pooled=pooled)


# ---------------------------------------------------------------------------
# serialization


def save_model(params: StressNetParams, path: str | Path) -> None:
    """Write the JSON model file; floats keep full precision via repr."""
    doc = {
        "format_version": params.format_version,
        "window_s": params.window_s,
        "arch": params.arch.to_dict(),
        "norm_stats": params.norm_stats.to_dict(),
        "tensors": {
            name: {"shape": list(t.shape), "data": t.ravel().tolist()}
            for name, t in sorted(params.tensors.items())
        },
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path: str | Path) -> StressNetParams:
    path = Path(path)
    if not path.is_file():
        raise ModelError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed model file: {exc}") from None
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"model format_version {version}, expected {FORMAT_VERSION}")
    arch = ArchConfig.from_dict(doc["arch"])
    window_s = float(doc["window_s"])
    shapes = expected_shapes(arch, window_s)
    tensors: dict[str, np.ndarray] = {}
    stored = doc["tensors"]
    if set(stored) != set(shapes):
        missing = set(shapes) - set(stored)
        extra = set(stored) - set(shapes)
        raise ShapeMismatch(f"tensor set mismatch: missing {missing or '{}'}, extra {extra or '{}'}")
    for name, entry in stored.items():
        shape = tuple(int(s) for s in entry["shape"])
        if shape != shapes[name]:
            raise ShapeMismatch(f"{name}: stored shape {shape}, expected {shapes[name]}")
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise ShapeMismatch(f"{name}: {data.size} values for shape {shape}")
        tensors[name] = data.reshape(shape)
    return StressNetParams(
        arch=arch,
        window_s=window_s,
        norm_stats=NormStats.from_dict(doc["norm_stats"]),
        tensors=tensors,
        format_version=version,
    )

"""Multi-rate signal dataset: on-disk format, windowing, normalization.

A recording directory holds one CSV per channel plus protocol labels:

    meta.json   {"subject_id": str,
                 "channels": [{"name": str, "rate_hz": num, "file": str}, ...],
                 "labels_file": "labels.csv"}
    <ch>.csv    header "t_s,value"; uniformly spaced, monotone t_s
    labels.csv  header "t_start_s,t_end_s,condition"; integer condition codes

Protocol codes follow the wearable-dataset convention: 1 = baseline,
2 = stress, 3 = amusement; anything else is unusable and produces no
windows. Channels keep their native sampling rates end to end; there is
deliberately no resampling or interpolation here.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

USABLE_CONDITIONS = (1, 2, 3)
STRESS_CONDITION = 2
STD_FLOOR = 1e-8

_TIME_TOL_S = 1e-6
_GRID_TOL = 1e-9


class DatasetError(Exception):
    """Base class for dataset loading/windowing failures."""


class MissingFile(DatasetError):
    def __init__(self, filename: str):
        super().__init__(f"missing file: {filename}")
        self.filename = filename


class MalformedRow(DatasetError):
    pass


class MalformedInterval(DatasetError):
    pass


class NonMonotonicTimestamps(DatasetError):
    pass


class RateMismatch(DatasetError):
    pass


class NonIntegralWindow(DatasetError):
    pass


class ChannelMismatch(DatasetError):
    pass


@dataclass(frozen=True)
class SignalChannel:
    """One physiological stream at its native rate.

    Sample k occurs at t0_s + k / rate_hz; uniform sampling, no gaps.
    """

    name: str
    rate_hz: float
    t0_s: float
    samples: np.ndarray

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise DatasetError(f"channel {self.name}: rate_hz must be positive")
        if len(self.samples) == 0:
            raise DatasetError(f"channel {self.name}: no samples")

    @property
    def end_s(self) -> float:
        """End of the covered interval: t0 + n / rate."""
        return self.t0_s + len(self.samples) / self.rate_hz

    def duration_s(self) -> float:
        return len(self.samples) / self.rate_hz


@dataclass(frozen=True)
class ConditionLabel:
    """Half-open protocol interval [t_start_s, t_end_s) with its code."""

    t_start_s: float
    t_end_s: float
    condition: int

    def __post_init__(self):
        if not self.t_start_s < self.t_end_s:
            raise MalformedInterval(
                f"interval end {self.t_end_s} not after start {self.t_start_s}"
            )


@dataclass(frozen=True)
class LabeledWindow:
    """Time-aligned fixed-duration slices of all channels plus the label."""

    subject_id: str
    t_start_s: float
    per_channel: Mapping[str, np.ndarray]
    label: int


@dataclass(frozen=True)
class Recording:
    subject_id: str
    channels: tuple[SignalChannel, ...]
    labels: tuple[ConditionLabel, ...]


@dataclass(frozen=True)
class NormStats:
    """Per-channel z-score statistics, fit on training windows only."""

    per_channel: Mapping[str, tuple[float, float]]  # name -> (mean, stddev)

    @classmethod
    def identity(cls, channel_names: Iterable[str]) -> "NormStats":
        return cls({name: (0.0, 1.0) for name in channel_names})

    def to_dict(self) -> dict:
        return {name: {"mean": m, "std": s} for name, (m, s) in sorted(self.per_channel.items())}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormStats":
        return cls({name: (float(v["mean"]), float(v["std"])) for name, v in d.items()})


def _read_channel_csv(path: Path, name: str, rate_hz: float) -> SignalChannel:
    if not path.is_file():
        raise MissingFile(path.name)
    times: list[float] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_s", "value"]:
            raise MalformedRow(f"{path.name}: expected header 't_s,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise MalformedRow(f"{path.name}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                t = float(row[0])
                v = float(row[1])
            except ValueError as exc:
                raise MalformedRow(f"{path.name}:{lineno}: {exc}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise MalformedRow(f"{path.name}:{lineno}: non-finite value")
            times.append(t)
            values.append(v)
    if not values:
        raise MalformedRow(f"{path.name}: no samples")
    t0 = times[0]
    for k in range(1, len(times)):
        if times[k] <= times[k - 1]:
            raise NonMonotonicTimestamps(f"{path.name}: row {k + 2}")
        if abs(times[k] - (t0 + k / rate_hz)) > _TIME_TOL_S:
            raise RateMismatch(
                f"{path.name}: sample {k} at t={times[k]} does not sit on the "
                f"declared {rate_hz} Hz grid"
            )
    return SignalChannel(name=name, rate_hz=rate_hz, t0_s=t0, samples=np.asarray(values))


def _read_labels_csv(path: Path) -> tuple[ConditionLabel, ...]:
    if not path.is_file():
        raise MissingFile(path.name)
    labels: list[ConditionLabel] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_start_s", "t_end_s", "condition"]:
            raise MalformedRow(
                f"{path.name}: expected header 't_start_s,t_end_s,condition', got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise MalformedRow(f"{path.name}:{lineno}: expected 3 fields")
            try:
                label = ConditionLabel(float(row[0]), float(row[1]), int(row[2]))
            except ValueError as exc:
                raise MalformedRow(f"{path.name}:{lineno}: {exc}") from None
            labels.append(label)
    labels.sort(key=lambda lab: lab.t_start_s)
    for prev, cur in zip(labels, labels[1:]):
        if cur.t_start_s < prev.t_end_s - _GRID_TOL:
            raise MalformedInterval(
                f"{path.name}: intervals [{prev.t_start_s},{prev.t_end_s}) and "
                f"[{cur.t_start_s},{cur.t_end_s}) overlap"
            )
    return tuple(labels)


def load_recording(dir_path: str | Path) -> Recording:
    """Load and validate one recording directory.

    Raises a DatasetError subtype on any inconsistency; never returns
    partial data.
    """
    dir_path = Path(dir_path)
    meta_path = dir_path / "meta.json"
    if not meta_path.is_file():
        raise MissingFile("meta.json")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedRow(f"meta.json: {exc}") from None
    try:
        subject_id = str(meta["subject_id"])
        declared = [(str(c["name"]), float(c["rate_hz"]), str(c["file"])) for c in meta["channels"]]
        labels_file = str(meta.get("labels_file", "labels.csv"))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRow(f"meta.json: {exc}") from None
    if not declared:
        raise MalformedRow("meta.json: no channels declared")
    channels = tuple(
        _read_channel_csv(dir_path / fname, name, rate) for name, rate, fname in declared
    )
    labels = _read_labels_csv(dir_path / labels_file)
    return Recording(subject_id=subject_id, channels=channels, labels=labels)


def _samples_per(name: str, rate_hz: float, span_s: float, what: str) -> int:
    n = span_s * rate_hz
    if abs(n - round(n)) > _GRID_TOL:
        raise NonIntegralWindow(
            f"{what} of {span_s} s is {n} samples at channel {name}'s {rate_hz} Hz; "
            "must be an integer"
        )
    return int(round(n))


def segment_windows(
    channels: Iterable[SignalChannel],
    labels: Iterable[ConditionLabel],
    window_s: float,
    shift_s: float,
    subject_id: str = "",
) -> list[LabeledWindow]:
    """Slide a window over the shift grid and label it by protocol condition.

    A window is emitted only when it lies entirely inside a single usable
    condition interval (codes 1/2/3) and every channel fully covers it;
    label 1 for the stress condition, else 0. Windows spanning interval
    boundaries or unlabeled time are dropped. Both window_s and shift_s
    must be whole numbers of samples on every channel so that all slices
    cover the identical time span.
    """
    channels = list(channels)
    labels = sorted(labels, key=lambda lab: lab.t_start_s)
    if shift_s <= 0:
        raise DatasetError("shift_s must be positive")
    counts = {}
    for ch in channels:
        counts[ch.name] = _samples_per(ch.name, ch.rate_hz, window_s, "window")
        _samples_per(ch.name, ch.rate_hz, shift_s, "shift")
    if not channels:
        return []

    grid_t0 = max(ch.t0_s for ch in channels)
    for ch in channels:
        # the shift grid must land on every channel's sample grid
        _samples_per(ch.name, ch.rate_hz, grid_t0 - ch.t0_s, "grid offset")
    end = min(ch.end_s for ch in channels)
    usable = [lab for lab in labels if lab.condition in USABLE_CONDITIONS]

    windows: list[LabeledWindow] = []
    k = 0
    while True:
        t = grid_t0 + k * shift_s
        k += 1
        if t + window_s > end + _GRID_TOL:
            break
        condition = None
        for lab in usable:
            if lab.t_start_s - _GRID_TOL <= t and t + window_s <= lab.t_end_s + _GRID_TOL:
                condition = lab.condition
                break
        if condition is None:
            continue
        per_channel = {}
        for ch in channels:
            start = int(round((t - ch.t0_s) * ch.rate_hz))
            per_channel[ch.name] = ch.samples[start : start + counts[ch.name]].copy()
        windows.append(
            LabeledWindow(
                subject_id=subject_id,
                t_start_s=t,
                per_channel=per_channel,
                label=1 if condition == STRESS_CONDITION else 0,
            )
        )
    return windows


def segment_recording(rec: Recording, window_s: float, shift_s: float) -> list[LabeledWindow]:
    return segment_windows(rec.channels, rec.labels, window_s, shift_s, subject_id=rec.subject_id)


def fit_norm_stats(windows: Iterable[LabeledWindow]) -> NormStats:
    """Pool every training window's samples per channel; stddev floored at 1e-8."""
    pooled: dict[str, list[np.ndarray]] = {}
    n = 0
    for win in windows:
        n += 1
        for name, vec in win.per_channel.items():
            pooled.setdefault(name, []).append(vec)
    if n == 0:
        raise DatasetError("cannot fit normalization stats on zero windows")
    stats = {}
    for name, chunks in pooled.items():
        allv = np.concatenate(chunks)
        stats[name] = (float(allv.mean()), max(float(allv.std()), STD_FLOOR))
    return NormStats(stats)


def normalize(window: LabeledWindow, stats: NormStats) -> LabeledWindow:
    """z-score each channel; label and timing unchanged."""
    per_channel = {}
    for name, vec in window.per_channel.items():
        if name not in stats.per_channel:
            raise ChannelMismatch(f"no normalization stats for channel {name}")
        mean, std = stats.per_channel[name]
        per_channel[name] = (vec - mean) / std
    return LabeledWindow(
        subject_id=window.subject_id,
        t_start_s=window.t_start_s,
        per_channel=per_channel,
        label=window.label,
    )

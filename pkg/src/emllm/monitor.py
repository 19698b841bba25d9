"""Runtime stress monitor: buffered ingestion, windowed inference, episodes.

Samples stream in per channel at their native rates; the watermark is the
end of the interval every channel has covered. Each tick runs the model
over every complete, not-yet-predicted window on the shift grid, so a
replayed file produces exactly the same predictions as offline
segmentation. Runs of consecutive stressed windows become episodes once
they pass the debounce length.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import LabeledWindow
from .model import StressNetParams, predict_proba

_TOL_S = 1e-9

DEFAULT_SHIFT_S = 5.0
MIN_EPISODE_WINDOWS = 3


class MonitorError(Exception):
    pass


class OutOfOrder(MonitorError):
    """Batch rejected: timestamps out of order, duplicated, or gapped."""


class UnknownChannel(MonitorError):
    pass


class _ChannelBuffer:
    """One contiguous run of uniform-rate samples with an evicted prefix."""

    def __init__(self, name: str, rate_hz: float):
        self.name = name
        self.rate_hz = rate_hz
        self.t0: float | None = None  # time of global sample index 0
        self.offset = 0  # global index of values[0]
        self.values: list[float] = []

    @property
    def end_s(self) -> float | None:
        if self.t0 is None:
            return None
        return self.t0 + (self.offset + len(self.values)) / self.rate_hz

    def push(self, batch: Sequence[tuple[float, float]]) -> int:
        if len(batch) == 0:
            return 0
        step = 1.0 / self.rate_hz
        times = [float(t) for t, _ in batch]
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise OutOfOrder(f"{self.name}: batch timestamps not strictly increasing")
        if self.t0 is None:
            expected = times[0]
        else:
            expected = self.t0 + (self.offset + len(self.values)) * step
        for k, t in enumerate(times):
            if abs(t - (expected + k * step)) > 1e-6:
                raise OutOfOrder(
                    f"{self.name}: sample at t={t} does not continue the "
                    f"{self.rate_hz} Hz stream (expected t={expected + k * step})"
                )
        if self.t0 is None:
            self.t0 = times[0]
        self.values.extend(float(v) for _, v in batch)
        return len(batch)

    def slice(self, t_start: float, count: int) -> np.ndarray:
        start = int(round((t_start - self.t0) * self.rate_hz)) - self.offset
        return np.asarray(self.values[start : start + count])

    def evict_before(self, t: float) -> None:
        if self.t0 is None:
            return
        keep_from = math.floor((t - self.t0) * self.rate_hz + _TOL_S)
        drop = min(max(keep_from - self.offset, 0), len(self.values))
        if drop > 0:
            del self.values[:drop]
            self.offset += drop


@dataclass(frozen=True)
class PredictionRecord:
    t_start_s: float
    t_end_s: float
    probability: float
    label: int


@dataclass(frozen=True)
class Run:
    """A maximal burst of consecutive stressed windows (merge bookkeeping)."""

    count: int
    start_s: float
    end_s: float


@dataclass(frozen=True)
class StressSummary:
    """Aggregate of window predictions over a monitoring period.

    leading/trailing describe the stressed runs touching the period's
    edges; merge_summaries needs them to stitch runs across a boundary.
    """

    period_start_s: float
    period_end_s: float
    windows_total: int
    windows_stressed: int
    stressed_fraction: float
    episodes: tuple[tuple[float, float], ...]
    peak_probability: float
    min_episode_windows: int = MIN_EPISODE_WINDOWS
    leading: Run | None = None
    trailing: Run | None = None

    def to_dict(self) -> dict:
        return {
            "period_start_s": self.period_start_s,
            "period_end_s": self.period_end_s,
            "windows_total": self.windows_total,
            "windows_stressed": self.windows_stressed,
            "stressed_fraction": self.stressed_fraction,
            "episodes": [{"start_s": s, "end_s": e} for s, e in self.episodes],
            "peak_probability": self.peak_probability,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StressSummary":
        """Rebuild the public projection (run bookkeeping is not persisted)."""
        return cls(
            period_start_s=float(d["period_start_s"]),
            period_end_s=float(d["period_end_s"]),
            windows_total=int(d["windows_total"]),
            windows_stressed=int(d["windows_stressed"]),
            stressed_fraction=float(d["stressed_fraction"]),
            episodes=tuple((float(e["start_s"]), float(e["end_s"])) for e in d["episodes"]),
            peak_probability=float(d["peak_probability"]),
        )

    def public(self) -> "StressSummary":
        return StressSummary.from_dict(self.to_dict())


def _coalesce(episodes: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Union episodes that overlap in wall-clock time.

    Windows are longer than the shift, so two stressed runs separated by
    only a few clear windows can still claim overlapping time spans; they
    read as one continuous stressed period.
    """
    out: list[tuple[float, float]] = []
    for start, end in episodes:
        if out and start < out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], end))
        else:
            out.append((start, end))
    return out


def summarize(
    records: Sequence[PredictionRecord],
    min_episode_windows: int = MIN_EPISODE_WINDOWS,
) -> StressSummary:
    """Fold ordered prediction records into the daily summary.

    An episode is a run of at least min_episode_windows consecutive
    stressed windows; shorter flickers count toward the stressed fraction
    but are not reported as episodes.
    """
    total = len(records)
    stressed = sum(1 for r in records if r.label == 1)
    peak = max((r.probability for r in records), default=0.0)
    episodes: list[tuple[float, float]] = []
    runs: list[Run] = []
    run_start: int | None = None
    for i, rec in enumerate(records):
        if rec.label == 1 and run_start is None:
            run_start = i
        if run_start is not None and (rec.label == 0 or i == total - 1):
            last = i - 1 if rec.label == 0 else i
            run = Run(
                count=last - run_start + 1,
                start_s=records[run_start].t_start_s,
                end_s=records[last].t_end_s,
            )
            runs.append(run)
            if run.count >= min_episode_windows:
                episodes.append((run.start_s, run.end_s))
            run_start = None
    leading = runs[0] if runs and records[0].label == 1 else None
    trailing = runs[-1] if runs and records[-1].label == 1 else None
    return StressSummary(
        period_start_s=records[0].t_start_s if records else 0.0,
        period_end_s=records[-1].t_end_s if records else 0.0,
        windows_total=total,
        windows_stressed=stressed,
        stressed_fraction=stressed / total if total else 0.0,
        episodes=tuple(_coalesce(episodes)),
        peak_probability=peak,
        min_episode_windows=min_episode_windows,
        leading=leading,
        trailing=trailing,
    )


def merge_summaries(a: StressSummary, b: StressSummary) -> StressSummary:
    """Combine summaries of adjacent record spans, stitching boundary runs."""
    if a.min_episode_windows != b.min_episode_windows:
        raise MonitorError("cannot merge summaries with different episode debounce")
    if a.windows_total == 0:
        return b
    if b.windows_total == 0:
        return a
    min_ep = a.min_episode_windows
    episodes = list(a.episodes)
    b_episodes = list(b.episodes)
    tail = a.trailing
    head = b.leading
    if tail is not None and head is not None and tail.count + head.count >= min_ep:
        start, end = tail.start_s, head.end_s
        if tail.count >= min_ep:
            # the boundary run already surfaced as (part of) a's last episode
            start = episodes.pop()[0]
        if head.count >= min_ep:
            end = b_episodes.pop(0)[1]
        episodes.append((start, end))
    episodes = _coalesce(episodes + b_episodes)

    a_all_stressed = a.windows_stressed == a.windows_total
    b_all_stressed = b.windows_stressed == b.windows_total
    leading = a.leading
    if a_all_stressed and head is not None:
        leading = Run(a.windows_total + head.count, a.leading.start_s, head.end_s)
    trailing = b.trailing
    if b_all_stressed and tail is not None:
        trailing = Run(b.windows_total + tail.count, tail.start_s, b.trailing.end_s)

    total = a.windows_total + b.windows_total
    stressed = a.windows_stressed + b.windows_stressed
    return StressSummary(
        period_start_s=a.period_start_s,
        period_end_s=b.period_end_s,
        windows_total=total,
        windows_stressed=stressed,
        stressed_fraction=stressed / total,
        episodes=tuple(episodes),
        peak_probability=max(a.peak_probability, b.peak_probability),
        min_episode_windows=min_ep,
        leading=leading,
        trailing=trailing,
    )


class StressMonitor:
    """Couples the stream buffer with a loaded model.

    One writer per channel may push concurrently; pushes and ticks share a
    lock so watermark advance plus window extraction stay consistent.
    Buffered data older than what future windows need is evicted after
    each tick (the monitor is not a raw-data historian; default retention
    is 3 windows).
    """

    def __init__(
        self,
        params: StressNetParams,
        shift_s: float = DEFAULT_SHIFT_S,
        min_episode_windows: int = MIN_EPISODE_WINDOWS,
        retention_windows: float = 3.0,
    ):
        self.params = params
        self.window_s = params.window_s
        self.shift_s = shift_s
        self.min_episode_windows = min_episode_windows
        self.retention_s = retention_windows * params.window_s
        self._channels = {
            ch.name: _ChannelBuffer(ch.name, ch.rate_hz) for ch in params.arch.channels
        }
        self._counts = {
            ch.name: int(round(params.window_s * ch.rate_hz)) for ch in params.arch.channels
        }
        self._next_k: int | None = None
        self._grid_t0: float | None = None
        self._records: list[PredictionRecord] = []
        self._lock = threading.Lock()

    def push_samples(self, channel: str, batch: Iterable[tuple[float, float]]) -> int:
        """Append a contiguous batch; the whole batch is rejected on any violation."""
        batch = list(batch)
        with self._lock:
            if channel not in self._channels:
                raise UnknownChannel(f"unknown channel: {channel}")
            return self._channels[channel].push(batch)

    @property
    def watermark_s(self) -> float | None:
        """End of the interval covered by every channel, None until all report."""
        with self._lock:
            return self._watermark()

    def _watermark(self) -> float | None:
        ends = [buf.end_s for buf in self._channels.values()]
        if any(e is None for e in ends):
            return None
        return min(ends)

    def tick(self) -> list[PredictionRecord]:
        """Predict every complete un-predicted window on the shift grid."""
        with self._lock:
            watermark = self._watermark()
            if watermark is None:
                return []
            if self._grid_t0 is None:
                self._grid_t0 = max(buf.t0 for buf in self._channels.values())
                self._next_k = 0
            new: list[PredictionRecord] = []
            while True:
                t = self._grid_t0 + self._next_k * self.shift_s
                if t + self.window_s > watermark + _TOL_S:
                    break
                window = LabeledWindow(
                    subject_id="",
                    t_start_s=t,
                    per_channel={
                        name: buf.slice(t, self._counts[name])
                        for name, buf in self._channels.items()
                    },
                    label=0,
                )
                prob = predict_proba(self.params, window)
                new.append(
                    PredictionRecord(
                        t_start_s=t,
                        t_end_s=t + self.window_s,
                        probability=prob,
                        label=1 if prob >= 0.5 else 0,
                    )
                )
                self._next_k += 1
            self._records.extend(new)
            next_t = self._grid_t0 + self._next_k * self.shift_s
            horizon = min(next_t, watermark - self.retention_s)
            for buf in self._channels.values():
                buf.evict_before(horizon)
            return new

    @property
    def records(self) -> list[PredictionRecord]:
        with self._lock:
            return list(self._records)

    def summary(self) -> StressSummary:
        """Immutable snapshot over everything predicted so far."""
        return summarize(self.records, self.min_episode_windows)

import numpy as np
import pytest
from helpers import condition_at, write_recording
from hypothesis import given, settings
from hypothesis import strategies as st

from emllm.dataset import (
    ChannelMismatch,
    LabeledWindow,
    MalformedInterval,
    MalformedRow,
    MissingFile,
    NonIntegralWindow,
    NonMonotonicTimestamps,
    NormStats,
    RateMismatch,
    fit_norm_stats,
    load_recording,
    normalize,
    segment_recording,
    segment_windows,
)


def _simple_recording(tmp_path, n_bvp=640, rate=64.0, labels=None):
    labels = labels or [(0.0, n_bvp / rate, 1)]
    return write_recording(
        tmp_path / "rec",
        {"bvp": (rate, list(np.arange(n_bvp, dtype=float)))},
        labels,
    )


class TestLoadRecording:
    def test_duration_from_rate(self, tmp_path):
        rec = load_recording(_simple_recording(tmp_path))
        assert rec.channels[0].duration_s() == pytest.approx(10.0)
        assert len(rec.channels[0].samples) == 640

    def test_missing_labels_file(self, tmp_path):
        d = _simple_recording(tmp_path)
        (d / "labels.csv").unlink()
        with pytest.raises(MissingFile) as exc:
            load_recording(d)
        assert exc.value.filename == "labels.csv"

    def test_missing_channel_file(self, tmp_path):
        d = _simple_recording(tmp_path)
        (d / "bvp.csv").unlink()
        with pytest.raises(MissingFile):
            load_recording(d)

    def test_end_before_start_interval(self, tmp_path):
        d = _simple_recording(tmp_path, labels=[(30.0, 20.0, 2)])
        with pytest.raises(MalformedInterval):
            load_recording(d)

    def test_overlapping_intervals(self, tmp_path):
        d = _simple_recording(tmp_path, labels=[(0.0, 6.0, 1), (5.0, 10.0, 2)])
        with pytest.raises(MalformedInterval):
            load_recording(d)

    def test_malformed_value(self, tmp_path):
        d = _simple_recording(tmp_path)
        csv = d / "bvp.csv"
        csv.write_text(csv.read_text().replace("1.0\n", "oops\n", 1))
        with pytest.raises(MalformedRow):
            load_recording(d)

    def test_bad_header(self, tmp_path):
        d = _simple_recording(tmp_path)
        csv = d / "bvp.csv"
        csv.write_text(csv.read_text().replace("t_s,value", "time,val"))
        with pytest.raises(MalformedRow):
            load_recording(d)

    def test_non_monotonic_timestamps(self, tmp_path):
        d = _simple_recording(tmp_path, n_bvp=4)
        (d / "bvp.csv").write_text("t_s,value\n0.0,1.0\n0.03125,2.0\n0.015625,3.0\n")
        with pytest.raises((NonMonotonicTimestamps, RateMismatch)):
            load_recording(d)

    def test_rate_mismatch(self, tmp_path):
        # samples spaced at 32 Hz while meta declares 64 Hz
        d = write_recording(
            tmp_path / "rec",
            {"bvp": (32.0, list(np.zeros(64)))},
            [(0.0, 2.0, 1)],
        )
        meta = d / "meta.json"
        meta.write_text(meta.read_text().replace("32.0", "64.0"))
        with pytest.raises(RateMismatch):
            load_recording(d)


class TestSegmentWindows:
    def test_count_law_single_interval(self, tmp_path):
        d = write_recording(
            tmp_path / "rec",
            {"eda": (4.0, list(np.zeros(2400)))},
            [(0.0, 600.0, 1)],
        )
        rec = load_recording(d)
        wins = segment_recording(rec, 60.0, 5.0)
        assert len(wins) == 109
        assert all(w.label == 0 for w in wins)

    def test_boundary_window_dropped(self, tmp_path):
        d = write_recording(
            tmp_path / "rec",
            {"eda": (4.0, list(np.zeros(800)))},
            [(0.0, 100.0, 1), (100.0, 200.0, 2)],
        )
        rec = load_recording(d)
        wins = segment_recording(rec, 60.0, 50.0)
        assert [(w.t_start_s, w.label) for w in wins] == [(0.0, 0), (100.0, 1)]

    def test_unusable_condition_yields_nothing(self, tmp_path):
        d = write_recording(
            tmp_path / "rec",
            {"eda": (4.0, list(np.zeros(800)))},
            [(0.0, 200.0, 4)],
        )
        rec = load_recording(d)
        assert segment_recording(rec, 60.0, 5.0) == []

    def test_non_integral_window_rejected(self, tmp_path):
        rec = load_recording(_simple_recording(tmp_path))
        with pytest.raises(NonIntegralWindow):
            segment_recording(rec, 0.7, 0.5)  # 0.7 s * 64 Hz = 44.8 samples

    def test_amusement_maps_to_non_stress(self, tmp_path):
        d = write_recording(
            tmp_path / "rec",
            {"eda": (4.0, list(np.zeros(400)))},
            [(0.0, 50.0, 3), (50.0, 100.0, 2)],
        )
        rec = load_recording(d)
        wins = segment_recording(rec, 10.0, 10.0)
        assert [w.label for w in wins] == [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]

    def test_deterministic(self, tmp_path):
        d = _simple_recording(tmp_path)
        a = segment_recording(load_recording(d), 2.0, 1.0)
        b = segment_recording(load_recording(d), 2.0, 1.0)
        assert len(a) == len(b)
        for wa, wb in zip(a, b):
            assert wa.t_start_s == wb.t_start_s and wa.label == wb.label
            assert np.array_equal(wa.per_channel["bvp"], wb.per_channel["bvp"])


@st.composite
def interval_layouts(draw):
    n = draw(st.integers(1, 5))
    bounds = sorted(draw(st.lists(st.integers(1, 119), min_size=n - 1, max_size=n - 1, unique=True)))
    edges = [0, *bounds, 120]
    conds = [draw(st.integers(1, 4)) for _ in range(n)]
    window = draw(st.integers(1, 30))
    shift = draw(st.integers(1, 10))
    return [(float(a), float(b), c) for a, b, c in zip(edges, edges[1:], conds)], window, shift


@settings(max_examples=120, deadline=None)
@given(interval_layouts())
def test_no_window_mixes_conditions(layout):
    """Property: every emitted window sits inside one usable interval, and
    alignment holds (slice values equal the source samples for the span)."""
    labels_list, window, shift = layout
    duration = 120.0
    slow = np.arange(int(duration * 1.0))  # 1 Hz, value = sample index
    fast = np.arange(int(duration * 4.0))  # 4 Hz
    from emllm.dataset import ConditionLabel, SignalChannel

    channels = [
        SignalChannel("slow", 1.0, 0.0, slow.astype(float)),
        SignalChannel("fast", 4.0, 0.0, fast.astype(float)),
    ]
    labels = [ConditionLabel(*lab) for lab in labels_list]
    wins = segment_windows(channels, labels, float(window), float(shift), subject_id="p")

    for w in wins:
        # per-sample oracle: every instant of the window has one usable code
        codes = {condition_at(labels_list, w.t_start_s + k * 0.25) for k in range(window * 4)}
        assert len(codes) == 1
        code = codes.pop()
        assert code in (1, 2, 3)
        assert w.label == (1 if code == 2 else 0)
        # channel alignment: values are their own indices
        assert np.array_equal(w.per_channel["slow"], slow[int(w.t_start_s) : int(w.t_start_s) + window])
        start4 = int(w.t_start_s * 4)
        assert np.array_equal(w.per_channel["fast"], fast[start4 : start4 + window * 4])

    # count law on fully-covered single intervals
    if len(labels_list) == 1 and labels_list[0][2] in (1, 2, 3) and duration >= window:
        assert len(wins) == (int(duration) - window) // shift + 1


class TestNormStats:
    def _win(self, values, subject="s", label=0):
        return LabeledWindow(subject, 0.0, {"eda": np.asarray(values, dtype=float)}, label)

    def test_mean_and_std(self):
        stats = fit_norm_stats([self._win([0.0, 2.0])])
        assert stats.per_channel["eda"] == (1.0, 1.0)

    def test_constant_channel_floored(self):
        stats = fit_norm_stats([self._win([5.0, 5.0, 5.0])])
        assert stats.per_channel["eda"] == (5.0, 1e-8)

    def test_pooled_over_windows(self):
        stats = fit_norm_stats([self._win([1.0, 1.0]), self._win([3.0, 3.0])])
        assert stats.per_channel["eda"] == (2.0, 1.0)

    def test_empty_error(self):
        with pytest.raises(Exception):
            fit_norm_stats([])

    def test_normalize_values(self):
        out = normalize(self._win([0.0, 2.0]), NormStats({"eda": (1.0, 1.0)}))
        assert np.array_equal(out.per_channel["eda"], [-1.0, 1.0])
        assert out.label == 0 and out.t_start_s == 0.0

    def test_normalize_roundtrip(self):
        rng = np.random.default_rng(1)
        vals = rng.normal(3.0, 2.0, 64)
        win = self._win(vals)
        stats = fit_norm_stats([win])
        normed = normalize(win, stats)
        mean, std = stats.per_channel["eda"]
        back = normed.per_channel["eda"] * std + mean
        assert np.max(np.abs(back - vals)) < 1e-12

    def test_unknown_channel(self):
        win = LabeledWindow("s", 0.0, {"temp": np.ones(4)}, 0)
        with pytest.raises(ChannelMismatch):
            normalize(win, NormStats({"eda": (0.0, 1.0)}))

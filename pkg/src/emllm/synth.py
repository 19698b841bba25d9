"""Synthetic multi-rate recordings with scripted stress intervals.

The signal models are deliberately simple (sinusoid + drift + Gaussian
noise): they exist to verify the pipeline at desk scale, not to imitate
real physiology. Stress intervals raise the tonic skin-conductance level,
speed up the pulse, and lower skin temperature by configurable effect
sizes, which makes the two classes separable by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_RATES = {"bvp": 64.0, "eda": 4.0, "temp": 4.0}

BVP_BASE_HZ = 1.2
EDA_TONIC_US = 2.0
TEMP_BASE_C = 33.0


@dataclass(frozen=True)
class ScenarioSpec:
    """Scripted day for one synthetic subject.

    intervals must tile [0, duration_s) without gaps or overlap; condition
    codes follow the dataset convention (1 baseline, 2 stress, 3 amusement).
    Effect sizes apply inside stress intervals.
    """

    subject_id: str
    duration_s: float
    intervals: tuple[tuple[float, float, int], ...]
    seed: int
    eda_shift: float = 1.5
    bvp_freq_shift: float = 0.3
    temp_shift: float = -0.3
    rates: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_RATES))

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        ivs = sorted(self.intervals)
        if not ivs:
            raise ValueError("at least one interval required")
        if ivs[0][0] != 0.0 or abs(ivs[-1][1] - self.duration_s) > 1e-9:
            raise ValueError("intervals must tile [0, duration_s)")
        for (s0, e0, _), (s1, _, _) in zip(ivs, ivs[1:]):
            if abs(s1 - e0) > 1e-9:
                raise ValueError(f"intervals must tile without gaps: {e0} != {s1}")
        for s0, e0, cond in ivs:
            if e0 <= s0:
                raise ValueError(f"empty interval [{s0}, {e0})")
            if cond not in (1, 2, 3):
                raise ValueError(f"condition {cond} not in {{1,2,3}}")


def _stress_mask(spec: ScenarioSpec, t: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(t), dtype=bool)
    for start, end, cond in spec.intervals:
        if cond == 2:
            mask |= (t >= start) & (t < end)
    return mask


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, t: np.ndarray, v: np.ndarray) -> None:
    lines = ["t_s,value"]
    lines.extend(f"{_fmt(ti)},{_fmt(vi)}" for ti, vi in zip(t, v))
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _render_channel(spec: ScenarioSpec, name: str, rng: np.random.Generator) -> np.ndarray:
    rate = spec.rates[name]
    t = np.arange(round(spec.duration_s * rate)) / rate
    stress = _stress_mask(spec, t)
    if name == "bvp":
        freq = BVP_BASE_HZ + spec.bvp_freq_shift * stress
        phase = 2.0 * math.pi * np.cumsum(freq) / rate
        return np.sin(phase) + 0.3 * np.sin(2.0 * phase) + rng.normal(0.0, 0.15, len(t))
    if name == "eda":
        drift = 0.1 * np.sin(2.0 * math.pi * t / 600.0 + rng.uniform(0, 2 * math.pi))
        return EDA_TONIC_US + spec.eda_shift * stress + drift + rng.normal(0.0, 0.25, len(t))
    if name == "temp":
        drift = 0.05 * np.sin(2.0 * math.pi * t / 1800.0 + rng.uniform(0, 2 * math.pi))
        return TEMP_BASE_C + spec.temp_shift * stress + drift + rng.normal(0.0, 0.05, len(t))
    raise ValueError(f"no signal model for channel {name}")


def generate(spec: ScenarioSpec, out_dir: str | Path) -> Path:
    """Write one recording directory in the dataset format; deterministic per seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    meta_channels = []
    for name in ("bvp", "eda", "temp"):
        if name not in spec.rates:
            continue
        rate = spec.rates[name]
        values = _render_channel(spec, name, rng)
        t = np.arange(len(values)) / rate
        _write_csv(out / f"{name}.csv", t, values)
        meta_channels.append({"name": name, "rate_hz": rate, "file": f"{name}.csv"})

    label_lines = ["t_start_s,t_end_s,condition"]
    label_lines.extend(
        f"{_fmt(s)},{_fmt(e)},{c}" for s, e, c in sorted(spec.intervals)
    )
    (out / "labels.csv").write_text("\n".join(label_lines) + "\n", newline="\n")

    meta = {
        "subject_id": spec.subject_id,
        "channels": meta_channels,
        "labels_file": "labels.csv",
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", newline="\n")
    return out


def scripted_day(
    subject_id: str,
    duration_s: float,
    seed: int,
    stress_intervals: int = 2,
) -> ScenarioSpec:
    """Deterministic interval layout: alternating calm/stress blocks.

    Stress blocks are spread evenly through the day; calm time alternates
    between baseline and amusement so both non-stress codes appear.
    """
    blocks = 2 * stress_intervals + 1
    if duration_s < 120.0 * blocks:
        raise ValueError("duration too short for the requested stress intervals")
    rng = np.random.default_rng(seed)
    intervals: list[tuple[float, float, int]] = []
    block = duration_s / blocks
    cursor = 0.0
    calm_code = 1
    for i in range(blocks):
        end = duration_s if i == blocks - 1 else cursor + block
        # jitter interior boundaries by up to 10% of a block, on a 5 s grid
        if i < blocks - 1:
            end += float(rng.uniform(-0.1, 0.1)) * block
            end = round(end / 5.0) * 5.0
        if i % 2 == 1:
            intervals.append((cursor, end, 2))
        else:
            intervals.append((cursor, end, calm_code))
            calm_code = 3 if calm_code == 1 else 1
        cursor = end
    return ScenarioSpec(
        subject_id=subject_id,
        duration_s=duration_s,
        intervals=tuple(intervals),
        seed=seed,
    )

"""Fan-in scaled uniform weight init (Kaiming-style)."""

from __future__ import annotations

import math

import numpy as np

from .rng import Xoshiro256


def kaiming_uniform(rng: Xoshiro256, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape)


def bias_uniform(rng: Xoshiro256, size: int, fan_in: int) -> np.ndarray:
    """Biases ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, (size,))

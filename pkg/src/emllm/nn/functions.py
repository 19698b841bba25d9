"""Activations and the binary cross-entropy loss."""

from __future__ import annotations

import numpy as np

PROB_EPS = 1e-12


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, gy: np.ndarray) -> np.ndarray:
    # subgradient 0 at x == 0
    return gy * (x > 0.0)


def sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic: never evaluates exp of a large positive."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def bce_loss(p: float, y: int) -> tuple[float, float]:
    """Binary cross-entropy of one prediction.

    Returns (loss, dL/dp) with p clamped to [1e-12, 1 - 1e-12]; batch loss
    is the mean over samples.
    """
    p = min(max(float(p), PROB_EPS), 1.0 - PROB_EPS)
    if y == 1:
        return -np.log(p), -1.0 / p
    return -np.log1p(-p), 1.0 / (1.0 - p)

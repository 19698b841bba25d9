"""numpy fallback kernels.

Forward kernels accumulate in the canonical order documented in
``emllm.nn.kernels`` (bias first, then input channel, then kernel tap /
input index), so their outputs are bit-identical to a naive scalar loop
and to the compiled backend. Backward kernels are free-order vectorized
code: gradients are only required to be exact up to the usual
finite-difference tolerance, not bit-pinned.
"""

from __future__ import annotations

import numpy as np


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    c_in, length = x.shape
    c_out, _, k = w.shape
    l_out = (length - k) // stride + 1
    y = np.empty((c_out, l_out), dtype=np.float64)
    y[:] = b[:, None]
    span = (l_out - 1) * stride + 1
    for i in range(c_in):
        xi = x[i]
        wi = w[:, i, :]
        for t in range(k):
            # one product rounding + one add rounding per element, in
            # canonical (i, t) order
            y += wi[:, t][:, None] * xi[t : t + span : stride][None, :]
    return y


def conv1d_backward(
    x: np.ndarray, w: np.ndarray, stride: int, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c_in, _ = x.shape
    c_out, _, k = w.shape
    l_out = gy.shape[1]
    span = (l_out - 1) * stride + 1
    gx = np.zeros_like(x)
    gw = np.empty_like(w)
    gb = gy.sum(axis=1)
    for t in range(k):
        xs = x[:, t : t + span : stride]
        gw[:, :, t] = gy @ xs.T
        gx[:, t : t + span : stride] += w[:, :, t].T @ gy
    return gx, gw, gb


def maxpool1d_forward(x: np.ndarray, size: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    _, length = x.shape
    l_out = (length - size) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, size, axis=1)[:, ::stride, :]
    # np.argmax returns the first maximal index: the documented tie-break
    arg = windows[:, :l_out, :].argmax(axis=2) + np.arange(l_out)[None, :] * stride
    y = np.take_along_axis(x, arg, axis=1)
    return y, arg


def maxpool1d_backward(arg: np.ndarray, gy: np.ndarray, length: int) -> np.ndarray:
    c, _ = gy.shape
    gx = np.zeros((c, length), dtype=np.float64)
    rows = np.repeat(np.arange(c), gy.shape[1])
    np.add.at(gx, (rows, arg.ravel()), gy.ravel())
    return gx


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, n = w.shape
    # cumsum walks left to right, reproducing the sequential accumulation
    # (bias, then x[0]..x[n-1]) of the scalar reference
    z = np.empty((m, n + 1), dtype=np.float64)
    z[:, 0] = b
    z[:, 1:] = w * x[None, :]
    return np.cumsum(z, axis=1)[:, -1]


def dense_backward(
    x: np.ndarray, w: np.ndarray, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gx = w.T @ gy
    gw = np.outer(gy, x)
    gb = gy.copy()
    return gx, gw, gb

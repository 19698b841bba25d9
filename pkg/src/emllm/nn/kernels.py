"""Tensor kernels with a compiled core and numpy fallback.

Tensors are C-contiguous float64 ndarrays: 1D signals are ``(channels,
length)``, dense vectors are 1D. The backend is picked once at import:
the compiled extension (``emllm.nn._ckernels``) when available, else the
numpy implementation. Set ``EMLLM_NN_BACKEND=python|cython`` to force one
(the benchmark does).

Both backends produce bit-identical forward outputs because they share
one canonical accumulation order:

* conv1d:  ``acc = b[o]; for i in channels: for t in taps: acc += w*x``
* dense:   ``acc = b[m]; for n in inputs: acc += w*x``
* maxpool: left-to-right scan, strict ``>`` so ties keep the first index

Every kernel output is checked for NaN/Inf; a non-finite value raises
``NonFiniteError`` rather than propagating.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels


class ShapeError(ValueError):
    """Operand shapes or strides do not conform."""


class NonFiniteError(FloatingPointError):
    """A kernel produced NaN or Inf."""


def _load_backend(name: str):
    if name == "python":
        return _pykernels, "python"
    try:
        from . import _ckernels

        return _ckernels, "cython"
    except ImportError:
        if name == "cython":
            raise ImportError(
                "compiled kernels requested via EMLLM_NN_BACKEND=cython but "
                "emllm.nn._ckernels is not built; run "
                "`pip install -e . --no-build-isolation`"
            )
        return _pykernels, "python"


_impl, BACKEND = _load_backend(os.environ.get("EMLLM_NN_BACKEND", "auto"))


def backend_name() -> str:
    return BACKEND


def _arr(a, ndim: int, what: str) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != ndim:
        raise ShapeError(f"{what} must be {ndim}-dimensional, got shape {out.shape}")
    return out


def _check_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.isfinite(a).all():
            raise NonFiniteError("kernel produced a non-finite value")


def conv1d_forward(x, w, b, stride: int) -> np.ndarray:
    """Valid (un-padded) 1D convolution: out length floor((l-k)/stride)+1."""
    x = _arr(x, 2, "input")
    w = _arr(w, 3, "kernel")
    b = _arr(b, 1, "bias")
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"kernel expects {w.shape[1]} input channels, input has {x.shape[0]}")
    if b.shape[0] != w.shape[0]:
        raise ShapeError(f"bias length {b.shape[0]} != output channels {w.shape[0]}")
    if x.shape[1] < w.shape[2]:
        raise ShapeError(f"input length {x.shape[1]} shorter than kernel size {w.shape[2]}")
    y = _impl.conv1d_forward(x, w, b, int(stride))
    _check_finite(y)
    return y


def conv1d_backward(x, w, stride: int, gy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (gx, gw, gb) of conv1d_forward given upstream gy."""
    x = _arr(x, 2, "input")
    w = _arr(w, 3, "kernel")
    gy = _arr(gy, 2, "upstream gradient")
    l_out = (x.shape[1] - w.shape[2]) // stride + 1
    if gy.shape != (w.shape[0], l_out):
        raise ShapeError(f"upstream gradient shape {gy.shape} != {(w.shape[0], l_out)}")
    grads = _impl.conv1d_backward(x, w, int(stride), gy)
    _check_finite(*grads)
    return grads


def maxpool1d(x, size: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Max pooling; returns (pooled, argmax indices) for backprop routing."""
    x = _arr(x, 2, "input")
    if size < 1:
        raise ShapeError(f"pool size must be >= 1, got {size}")
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if x.shape[1] < size:
        raise ShapeError(f"input length {x.shape[1]} shorter than pool size {size}")
    y, arg = _impl.maxpool1d_forward(x, int(size), int(stride))
    _check_finite(y)
    return y, arg


def maxpool1d_backward(arg, gy, length: int) -> np.ndarray:
    arg = np.ascontiguousarray(arg, dtype=np.int64)
    gy = _arr(gy, 2, "upstream gradient")
    if arg.shape != gy.shape:
        raise ShapeError(f"argmax shape {arg.shape} != gradient shape {gy.shape}")
    gx = _impl.maxpool1d_backward(arg, gy, int(length))
    _check_finite(gx)
    return gx


def dense_forward(x, w, b) -> np.ndarray:
    """Affine map y = Wx + b."""
    x = _arr(x, 1, "input")
    w = _arr(w, 2, "weights")
    b = _arr(b, 1, "bias")
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"weights expect {w.shape[1]} inputs, got {x.shape[0]}")
    if b.shape[0] != w.shape[0]:
        raise ShapeError(f"bias length {b.shape[0]} != output size {w.shape[0]}")
    y = _impl.dense_forward(x, w, b)
    _check_finite(y)
    return y


def dense_backward(x, w, gy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = _arr(x, 1, "input")
    w = _arr(w, 2, "weights")
    gy = _arr(gy, 1, "upstream gradient")
    if gy.shape[0] != w.shape[0]:
        raise ShapeError(f"upstream gradient length {gy.shape[0]} != output size {w.shape[0]}")
    grads = _impl.dense_backward(x, w, gy)
    _check_finite(*grads)
    return grads

"""Minimal neural-network kernel: conv/pool/dense layers, activations,
binary cross-entropy, exact backprop pieces, and Adam.

Hot kernels live in a compiled extension with a numpy fallback; see
``emllm.nn.kernels`` for the backend contract.
"""

from .functions import bce_loss, relu, relu_backward, sigmoid
from .init import bias_uniform, kaiming_uniform
from .kernels import (
    BACKEND,
    NonFiniteError,
    ShapeError,
    backend_name,
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    maxpool1d,
    maxpool1d_backward,
)
from .optim import AdamState, adam_step
from .rng import Xoshiro256

__all__ = [
    "BACKEND",
    "AdamState",
    "NonFiniteError",
    "ShapeError",
    "Xoshiro256",
    "adam_step",
    "backend_name",
    "bce_loss",
    "bias_uniform",
    "conv1d_backward",
    "conv1d_forward",
    "dense_backward",
    "dense_forward",
    "kaiming_uniform",
    "maxpool1d",
    "maxpool1d_backward",
    "relu",
    "relu_backward",
    "sigmoid",
]

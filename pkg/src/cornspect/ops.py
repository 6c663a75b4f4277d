"""Shape-checked dense tensor arithmetic: convolution, pooling, activations.

All operations are pure functions over float64 numpy arrays. Convolution
is cross-correlation (no kernel flip) realized as im2col + one matrix
multiplication; ``reference.conv2d_direct`` keeps an independent
loop-based oracle for tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError

# Smallest/largest float64 values inside the open interval (0, 1); sigmoid
# output is clamped here so saturated inputs never round to exactly 0 or 1.
_SIGMOID_LO = np.finfo(np.float64).tiny
_SIGMOID_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one 2-D convolution."""

    in_channels: int
    out_channels: int
    kernel_height: int
    kernel_width: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.kernel_height, self.kernel_width) < 1:
            raise DimensionError(f"conv spec has non-positive dimensions: {self}")
        if self.stride < 1 or self.padding < 0:
            raise DimensionError(f"conv spec needs stride >= 1 and padding >= 0: {self}")

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        """Output spatial size: floor((in + 2p - k)/s) + 1 per axis."""
        oh = (h + 2 * self.padding - self.kernel_height) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel_width) // self.stride + 1
        if oh < 1 or ow < 1:
            raise DimensionError(
                f"conv output would be {oh}x{ow} for input {h}x{w} with {self}"
            )
        return oh, ow


@dataclass
class Conv2dCache:
    """Forward-pass byproducts needed by conv2d_backward."""

    cols: np.ndarray
    input_shape: tuple[int, ...]
    padded_hw: tuple[int, int]
    weights: np.ndarray
    spec: ConvSpec


@dataclass
class MaxPoolCache:
    """Argmax positions recorded by maxpool2x2."""

    argmax: np.ndarray
    input_hw: tuple[int, int]


def _as_f64(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a (M,K) and b (K,N)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} x {b.shape}")
    return a @ b


def conv2d_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, spec: ConvSpec
) -> tuple[np.ndarray, Conv2dCache]:
    """Cross-correlate x (N,C,H,W) with weights (F,C,kh,kw) plus bias (F,).

    Returns (output (N,F,H',W'), cache for the backward pass).
    """
    x = _as_f64(x)
    weights = _as_f64(weights)
    bias = _as_f64(bias)
    if x.ndim != 4 or x.shape[1] != spec.in_channels:
        raise DimensionError(f"input shape {x.shape} does not match {spec}")
    expected_w = (spec.out_channels, spec.in_channels, spec.kernel_height, spec.kernel_width)
    if weights.shape != expected_w:
        raise DimensionError(f"weight shape {weights.shape} != expected {expected_w}")
    if bias.shape != (spec.out_channels,):
        raise DimensionError(f"bias shape {bias.shape} != ({spec.out_channels},)")

    n, c, h, w = x.shape
    oh, ow = spec.output_hw(h, w)
    p = spec.padding
    if p:
        xp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=np.float64)
        xp[:, :, p : p + h, p : p + w] = x
    else:
        xp = x
    cols = kernels.im2col(
        xp, spec.kernel_height, spec.kernel_width, spec.stride, spec.stride, oh, ow
    )
    wmat = weights.reshape(spec.out_channels, -1)
    out = np.matmul(wmat, cols) + bias[:, None]
    out = out.reshape(n, spec.out_channels, oh, ow)
    cache = Conv2dCache(cols, x.shape, xp.shape[2:], weights, spec)
    return out, cache


def conv2d_backward(
    cache: Conv2dCache, grad_output: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward wrt (input, weights, bias)."""
    grad_output = _as_f64(grad_output)
    spec = cache.spec
    n, c, h, w = cache.input_shape
    oh, ow = spec.output_hw(h, w)
    if grad_output.shape != (n, spec.out_channels, oh, ow):
        raise DimensionError(
            f"grad_output shape {grad_output.shape} != forward output "
            f"{(n, spec.out_channels, oh, ow)}"
        )
    go = grad_output.reshape(n, spec.out_channels, oh * ow)
    grad_bias = go.sum(axis=(0, 2))
    grad_weights = (
        np.matmul(go, cache.cols.transpose(0, 2, 1)).sum(axis=0).reshape(cache.weights.shape)
    )
    wmat = cache.weights.reshape(spec.out_channels, -1)
    grad_cols = np.matmul(wmat.T, go)
    hp, wp = cache.padded_hw
    grad_padded = kernels.col2im(
        grad_cols, c, hp, wp, spec.kernel_height, spec.kernel_width, spec.stride, spec.stride, oh, ow
    )
    p = spec.padding
    grad_input = grad_padded[:, :, p : p + h, p : p + w] if p else grad_padded
    return np.ascontiguousarray(grad_input), grad_weights, grad_bias


def maxpool2x2(x: np.ndarray) -> tuple[np.ndarray, MaxPoolCache]:
    """2x2 max pooling with stride 2; ties go to the first row-major index."""
    x = _as_f64(x)
    if x.ndim != 4:
        raise DimensionError(f"maxpool expects (N,C,H,W), got shape {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"maxpool needs even spatial dims, got {h}x{w}")
    out, argmax = kernels.maxpool2x2_forward(x)
    return out, MaxPoolCache(argmax, (h, w))


def maxpool2x2_backward(cache: MaxPoolCache, grad_output: np.ndarray) -> np.ndarray:
    """Deposit grad_output at the recorded argmax positions."""
    grad_output = _as_f64(grad_output)
    h, w = cache.input_hw
    if grad_output.shape != cache.argmax.shape:
        raise DimensionError(
            f"grad_output shape {grad_output.shape} != pooled shape {cache.argmax.shape}"
        )
    return kernels.maxpool2x2_backward(grad_output, cache.argmax, h, w)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x: np.ndarray, grad_output: np.ndarray) -> np.ndarray:
    """Gradient of relu at forward input x (subgradient 0 at x == 0)."""
    return np.asarray(grad_output, dtype=np.float64) * (np.asarray(x) > 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, computed branch-wise so exp never overflows."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _SIGMOID_LO, _SIGMOID_HI)


def sigmoid_backward(sig_out: np.ndarray, grad_output: np.ndarray) -> np.ndarray:
    """Gradient through sigmoid given its forward output."""
    s = np.asarray(sig_out, dtype=np.float64)
    return np.asarray(grad_output, dtype=np.float64) * s * (1.0 - s)

"""Direct-loop reference convolution, kept as an independent oracle.

Deliberately naive: six nested loops, no im2col, no shared code with
``ops.conv2d_forward``. Slow, for small test instances only.
"""

import numpy as np

from .ops import ConvSpec


def conv2d_direct(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Cross-correlation of x (N,C,H,W) with weights (F,C,kh,kw) plus bias."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    n, c, h, w = x.shape
    oh, ow = spec.output_hw(h, w)
    p, s = spec.padding, spec.stride
    out = np.zeros((n, spec.out_channels, oh, ow))
    for b in range(n):
        for f in range(spec.out_channels):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ch in range(c):
                        for ki in range(spec.kernel_height):
                            for kj in range(spec.kernel_width):
                                yy = i * s + ki - p
                                xx = j * s + kj - p
                                if 0 <= yy < h and 0 <= xx < w:
                                    acc += x[b, ch, yy, xx] * weights[f, ch, ki, kj]
                    out[b, f, i, j] = acc + bias[f]
    return out

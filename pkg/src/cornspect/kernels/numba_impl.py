"""Numba-jitted implementations of the hot kernels.

Signatures and outputs match ``numpy_impl`` exactly; see that module for
the contracts. All functions compile with ``cache=True`` so repeat runs
skip the JIT cost.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def im2col(x, kh, kw, sh, sw, out_h, out_w):
    n, c, _, _ = x.shape
    cols = np.empty((n, c * kh * kw, out_h * out_w), dtype=x.dtype)
    for b in range(n):
        for ch in range(c):
            for ki in range(kh):
                for kj in range(kw):
                    row = (ch * kh + ki) * kw + kj
                    for oh in range(out_h):
                        src_i = oh * sh + ki
                        for ow in range(out_w):
                            cols[b, row, oh * out_w + ow] = x[b, ch, src_i, ow * sw + kj]
    return cols


@njit(cache=True)
def col2im(cols, c, hp, wp, kh, kw, sh, sw, out_h, out_w):
    n = cols.shape[0]
    x = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for b in range(n):
        for ch in range(c):
            # (ki, kj) ascending: same per-pixel accumulation order as the
            # numpy slice-add fallback, keeping both backends bit-identical
            for ki in range(kh):
                for kj in range(kw):
                    row = (ch * kh + ki) * kw + kj
                    for oh in range(out_h):
                        dst_i = oh * sh + ki
                        for ow in range(out_w):
                            x[b, ch, dst_i, ow * sw + kj] += cols[b, row, oh * out_w + ow]
    return x


@njit(cache=True)
def maxpool2x2_forward(x):
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    out = np.empty((n, c, oh, ow), dtype=x.dtype)
    argmax = np.empty((n, c, oh, ow), dtype=np.int64)
    for b in range(n):
        for ch in range(c):
            for i in range(oh):
                for j in range(ow):
                    best = x[b, ch, 2 * i, 2 * j]
                    best_k = 0
                    k = 0
                    for di in range(2):
                        for dj in range(2):
                            v = x[b, ch, 2 * i + di, 2 * j + dj]
                            if v > best:  # strict: first index wins ties
                                best = v
                                best_k = k
                            k += 1
                    out[b, ch, i, j] = best
                    argmax[b, ch, i, j] = best_k
    return out, argmax


@njit(cache=True)
def maxpool2x2_backward(grad_out, argmax, h, w):
    n, c, oh, ow = grad_out.shape
    grad_in = np.zeros((n, c, h, w), dtype=grad_out.dtype)
    for b in range(n):
        for ch in range(c):
            for i in range(oh):
                for j in range(ow):
                    k = argmax[b, ch, i, j]
                    grad_in[b, ch, 2 * i + k // 2, 2 * j + k % 2] = grad_out[b, ch, i, j]
    return grad_in


@njit(cache=True)
def label_components(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    stack = np.empty((h * w, 2), dtype=np.int32)
    count = 0
    for i in range(h):
        for j in range(w):
            if mask[i, j] and labels[i, j] == 0:
                count += 1
                labels[i, j] = count
                stack[0, 0] = i
                stack[0, 1] = j
                top = 1
                while top > 0:
                    top -= 1
                    y = stack[top, 0]
                    x = stack[top, 1]
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            ny = y + dy
                            nx = x + dx
                            if 0 <= ny < h and 0 <= nx < w:
                                if mask[ny, nx] and labels[ny, nx] == 0:
                                    labels[ny, nx] = count
                                    stack[top, 0] = ny
                                    stack[top, 1] = nx
                                    top += 1
    return labels, count

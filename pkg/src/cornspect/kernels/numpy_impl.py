"""Pure-numpy implementations of the hot kernels.

Every function here has a numba twin in ``numba_impl`` with the same
signature and bit-identical output (accumulation orders are matched
deliberately, see ``col2im``).
"""

import numpy as np


def im2col(x, kh, kw, sh, sw, out_h, out_w):
    """Rearrange sliding (kh, kw) patches of x (N,C,H,W) into columns.

    Returns (N, C*kh*kw, out_h*out_w); column index order is (c, ki, kj).
    Input must already be padded.
    """
    n, c, _, _ = x.shape
    s_n, s_c, s_h, s_w = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, kh, kw, out_h, out_w),
        strides=(s_n, s_c, s_h, s_w, sh * s_h, sw * s_w),
        writeable=False,
    )
    return patches.reshape(n, c * kh * kw, out_h * out_w)


def col2im(cols, c, hp, wp, kh, kw, sh, sw, out_h, out_w):
    """Scatter-add columns back onto an (N,C,hp,wp) image (inverse of im2col).

    Per-pixel contributions accumulate in ascending (ki, kj) order; the
    numba twin uses the same order so both paths agree bitwise.
    """
    n = cols.shape[0]
    x = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, out_h, out_w)
    for ki in range(kh):
        for kj in range(kw):
            x[:, :, ki : ki + sh * out_h : sh, kj : kj + sw * out_w : sw] += cols[
                :, :, ki, kj, :, :
            ]
    return x


def maxpool2x2_forward(x):
    """2x2/stride-2 max pool. Returns (out, argmax) with argmax in {0,1,2,3}.

    Window positions are flattened row-major ((0,0),(0,1),(1,0),(1,1));
    ties resolve to the first index.
    """
    n, c, h, w = x.shape
    windows = (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), argmax.astype(np.int64)


def maxpool2x2_backward(grad_out, argmax, h, w):
    """Route grad_out back to the recorded argmax positions (zeros elsewhere)."""
    n, c, oh, ow = grad_out.shape
    grad_in = np.zeros((n, c, h, w), dtype=grad_out.dtype)
    n_i, c_i, i_i, j_i = np.indices((n, c, oh, ow), sparse=True)
    rows = i_i * 2 + argmax // 2
    cols = j_i * 2 + argmax % 2
    grad_in[n_i, c_i, rows, cols] = grad_out
    return grad_in


def label_components(mask):
    """8-connected component labeling of a boolean mask.

    Returns (labels, count); labels are int32, background 0, components
    numbered 1..count in row-major order of their first pixel.
    """
    h, w = mask.shape
    big = np.int64(h * w)
    lab = np.where(mask, np.arange(h * w, dtype=np.int64).reshape(h, w), big)
    padded = np.full((h + 2, w + 2), big, dtype=np.int64)
    while True:
        padded[1:-1, 1:-1] = lab
        nxt = lab.copy()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                np.minimum(nxt, padded[1 + dy : h + 1 + dy, 1 + dx : w + 1 + dx], out=nxt)
        nxt[~mask] = big
        if np.array_equal(nxt, lab):
            break
        lab = nxt
    roots = np.unique(lab[mask])
    labels = np.zeros((h, w), dtype=np.int32)
    if roots.size:
        # sorted root ids are the components' first row-major pixels,
        # matching the flood-fill discovery order of the numba twin
        remap = np.zeros(int(roots[-1]) + 1, dtype=np.int32)
        remap[roots] = np.arange(1, roots.size + 1, dtype=np.int32)
        labels[mask] = remap[lab[mask]]
    return labels, int(roots.size)

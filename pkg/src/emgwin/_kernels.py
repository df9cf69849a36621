"""Hot inner loops, with numba implementations and pure-numpy fallbacks.

Set ``EMGWIN_NO_NUMBA=1`` in the environment (before import) to force the
numpy path. Both paths compute the same quantities; they are not guaranteed
to agree bit-for-bit, so determinism holds within a backend only.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_DISABLED = os.environ.get("EMGWIN_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("disabled by EMGWIN_NO_NUMBA")
    import numba as nb
except ImportError:
    nb = None

BACKEND = "numba" if nb is not None else "numpy"


# --------------------------------------------------------------------------
# biquad recursion (direct form II transposed), applied along axis 0 of a
# (L, C) array, all columns independently

def sosfilt_numpy(sos, x):
    y = np.array(x, dtype=np.float64, copy=True)
    for b0, b1, b2, _, a1, a2 in sos:
        z1 = np.zeros(y.shape[1])
        z2 = np.zeros(y.shape[1])
        for n in range(y.shape[0]):
            xn = y[n].copy()
            yn = b0 * xn + z1
            z1 = b1 * xn - a1 * yn + z2
            z2 = b2 * xn - a2 * yn
            y[n] = yn
    return y


def _sosfilt_loop(sos, x):
    y = x.copy()
    L, C = y.shape
    for s in range(sos.shape[0]):
        b0, b1, b2 = sos[s, 0], sos[s, 1], sos[s, 2]
        a1, a2 = sos[s, 4], sos[s, 5]
        for c in range(C):
            z1 = 0.0
            z2 = 0.0
            for n in range(L):
                xn = y[n, c]
                yn = b0 * xn + z1
                z1 = b1 * xn - a1 * yn + z2
                z2 = b2 * xn - a2 * yn
                y[n, c] = yn
    return y


# --------------------------------------------------------------------------
# im2col / col2im for same-padded k x k correlation on NHWC tensors.
# Column layout is [kh][kw][cin]: each k x k tap contributes one contiguous
# run of Cin values. im2col has no numba version: the strided view plus one
# reshape copy measured about twice as fast as a compiled loop.

def im2col_numpy(xp, k):
    n, hp, wp, c = xp.shape
    h, w = hp - k + 1, wp - k + 1
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (n, h, w, c, k, k)
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, k * k * c)


def col2im_numpy(dcols, shape, k):
    n, h, w, c = shape
    d = dcols.reshape(n, h, w, k, k, c)
    dxp = np.zeros((n, h + k - 1, w + k - 1, c))
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + h, j:j + w, :] += d[:, :, :, i, j, :]
    return dxp


def _col2im_loop(dcols, n, h, w, c, k):
    dxp = np.zeros((n, h + k - 1, w + k - 1, c))
    row = 0
    for b in range(n):
        for y in range(h):
            for x in range(w):
                col = 0
                for i in range(k):
                    for j in range(k):
                        for ch in range(c):
                            dxp[b, y + i, x + j, ch] += dcols[row, col + ch]
                        col += c
                row += 1
    return dxp


# --------------------------------------------------------------------------
# 2x2 max pooling with recorded argmax (flat index 0..3 inside each window,
# first maximum wins on ties)

def maxpool_numpy(x):
    n, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    blk = x[:, :2 * ho, :2 * wo, :].reshape(n, ho, 2, wo, 2, c)
    blk = blk.transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, 4)
    arg = blk.argmax(axis=-1)
    out = np.take_along_axis(blk, arg[..., None], axis=-1)[..., 0]
    return out, arg.astype(np.int8)


def maxpool_backward_numpy(dout, arg, in_shape):
    n, h, w, c = in_shape
    ho, wo = dout.shape[1], dout.shape[2]
    g = np.zeros((n, ho, wo, c, 4))
    np.put_along_axis(g, arg[..., None].astype(np.intp), dout[..., None], axis=-1)
    g = g.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ho, 2 * wo, c)
    dx = np.zeros(in_shape)
    dx[:, :2 * ho, :2 * wo, :] = g
    return dx


def _maxpool_loop(x):
    n, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    out = np.empty((n, ho, wo, c))
    arg = np.empty((n, ho, wo, c), np.int8)
    for b in range(n):
        for y in range(ho):
            for xx in range(wo):
                for ch in range(c):
                    best = x[b, 2 * y, 2 * xx, ch]
                    bi = 0
                    v = x[b, 2 * y, 2 * xx + 1, ch]
                    if v > best:
                        best = v
                        bi = 1
                    v = x[b, 2 * y + 1, 2 * xx, ch]
                    if v > best:
                        best = v
                        bi = 2
                    v = x[b, 2 * y + 1, 2 * xx + 1, ch]
                    if v > best:
                        best = v
                        bi = 3
                    out[b, y, xx, ch] = best
                    arg[b, y, xx, ch] = bi
    return out, arg


def _maxpool_backward_loop(dout, arg, n, h, w, c):
    dx = np.zeros((n, h, w, c))
    ho, wo = dout.shape[1], dout.shape[2]
    for b in range(n):
        for y in range(ho):
            for xx in range(wo):
                for ch in range(c):
                    a = arg[b, y, xx, ch]
                    dx[b, 2 * y + a // 2, 2 * xx + a % 2, ch] = dout[b, y, xx, ch]
    return dx


# --------------------------------------------------------------------------
# public dispatch

im2col = im2col_numpy

if nb is not None:
    _sosfilt_nb = nb.njit(cache=True)(_sosfilt_loop)
    _col2im_nb = nb.njit(cache=True)(_col2im_loop)
    _maxpool_nb = nb.njit(cache=True)(_maxpool_loop)
    _maxpool_backward_nb = nb.njit(cache=True)(_maxpool_backward_loop)

    def sosfilt(sos, x):
        return _sosfilt_nb(np.ascontiguousarray(sos, dtype=np.float64),
                           np.ascontiguousarray(x, dtype=np.float64))

    def col2im(dcols, shape, k):
        n, h, w, c = shape
        return _col2im_nb(np.ascontiguousarray(dcols), n, h, w, c, k)

    def maxpool(x):
        return _maxpool_nb(np.ascontiguousarray(x))

    def maxpool_backward(dout, arg, in_shape):
        n, h, w, c = in_shape
        return _maxpool_backward_nb(np.ascontiguousarray(dout), arg, n, h, w, c)
else:
    sosfilt = sosfilt_numpy
    col2im = col2im_numpy
    maxpool = maxpool_numpy
    maxpool_backward = maxpool_backward_numpy

"""Layer primitives on NHWC float64 tensors.

Every function accepts a single tensor (H, W, C) or a batch (N, H, W, C);
vectors are (M,) or (N, M). Backward functions always take batched arrays.
"""

import numpy as np

from .. import _kernels
from ..errors import ShapeError

# cap on the im2col buffer, in float64 elements
_COLS_BUDGET = 1 << 22


def _batched(x, ndim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ShapeError(f"expected {ndim - 1}- or {ndim}-d input, got shape {x.shape}")
    return x, False


def _chunks(n, per_item):
    step = max(1, _COLS_BUDGET // max(per_item, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _weight_matrix(w):
    # (Cout, Cin, k, k) -> (Cout, k*k*Cin), matching the im2col column order
    return w.transpose(0, 2, 3, 1).reshape(w.shape[0], -1)


def conv2d(x, w, b):
    """Same-padded 2D cross-correlation with per-channel bias.

    ``w`` has shape (Cout, Cin, k, k) with odd k; zero padding of k // 2
    keeps the spatial size.
    """
    x, single = _batched(x, 4)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cout, cin, kh, kw = w.shape
    if kh != kw or kh % 2 == 0:
        raise ShapeError(f"kernel must be square and odd, got {kh}x{kw}")
    if x.shape[-1] != cin or b.shape != (cout,):
        raise ShapeError(f"input {x.shape} / bias {b.shape} do not match weights {w.shape}")
    k = kh
    n, h, wd, _ = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    wmat = _weight_matrix(w)
    out = np.empty((n, h, wd, cout))
    for sl in _chunks(n, h * wd * cin * k * k):
        cols = _kernels.im2col(xp[sl], k)
        out[sl] = (cols @ wmat.T).reshape(-1, h, wd, cout)
    out += b
    return out[0] if single else out


def conv2d_backward(dout, x, w, need_dx=True):
    """Gradients of a same-padded conv. Returns (dx or None, dw, db)."""
    cout, cin, k, _ = w.shape
    n, h, wd, _ = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    wmat = _weight_matrix(w)
    dw = np.zeros_like(wmat)
    dx = np.empty_like(x) if need_dx else None
    for sl in _chunks(n, h * wd * cin * k * k):
        d2 = dout[sl].reshape(-1, cout)
        cols = _kernels.im2col(xp[sl], k)
        dw += d2.T @ cols
        if need_dx:
            m = sl.stop - sl.start
            dxp = _kernels.col2im(d2 @ wmat, (m, h, wd, cin), k)
            dx[sl] = dxp[:, pad:pad + h, pad:pad + wd, :]
    db = dout.sum(axis=(0, 1, 2))
    dw = dw.reshape(cout, k, k, cin).transpose(0, 3, 1, 2)
    return dx, np.ascontiguousarray(dw), db


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def dropout_mask(shape, p, rng):
    """Inverted-dropout mask: 0 with probability p, else 1 / (1 - p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {p}")
    keep = rng.random(shape, dtype=np.float32) >= np.float32(p)
    return keep / (1.0 - p)


def dropout(x, p=0.1, mode="eval", rng=None):
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {p}")
    x = np.asarray(x, dtype=np.float64)
    if mode != "train" or p == 0.0:
        return x.copy()
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    return x * dropout_mask(x.shape, p, rng)


def maxpool2x2(x):
    """Non-overlapping 2x2 max pool; a trailing odd row/column is dropped."""
    out, _ = maxpool2x2_with_arg(x)
    return out


def maxpool2x2_with_arg(x):
    x, single = _batched(x, 4)
    if x.shape[1] < 2 or x.shape[2] < 2:
        raise ShapeError(f"max pooling needs at least 2x2 input, got {x.shape[1:3]}")
    out, arg = _kernels.maxpool(x)
    return (out[0], arg[0]) if single else (out, arg)


def maxpool2x2_backward(dout, arg, in_shape):
    return _kernels.maxpool_backward(dout, arg, tuple(in_shape))


def global_max_pool(x):
    out, _ = global_max_pool_with_arg(x)
    return out


def global_max_pool_with_arg(x):
    x, single = _batched(x, 4)
    if x.shape[1] * x.shape[2] == 0:
        raise ShapeError("global max pool of an empty tensor")
    flat = x.reshape(x.shape[0], -1, x.shape[3])
    arg = flat.argmax(axis=1)
    out = np.take_along_axis(flat, arg[:, None, :], axis=1)[:, 0, :]
    return (out[0], arg[0]) if single else (out, arg)


def global_max_pool_backward(dout, arg, in_shape):
    n, h, w, c = in_shape
    g = np.zeros((n, h * w, c))
    np.put_along_axis(g, arg[:, None, :], dout[:, None, :], axis=1)
    return g.reshape(in_shape)


def dense(x, w, b):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.shape[-1] != w.shape[1] or np.shape(b) != (w.shape[0],):
        raise ShapeError(f"dense input {x.shape} does not match weights {w.shape}")
    return x @ w.T + b


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)

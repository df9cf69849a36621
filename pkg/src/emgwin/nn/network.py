"""The four-block convolutional classifier, its forward pass and exact gradients."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from . import layers

DEFAULT_FILTERS = (32, 32, 64, 64)
DEFAULT_POOLED = (False, False, True, True)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description.

    Defaults give the full-size model: 32 electrodes, blocks of
    32/32/64/64 filters with 2x2 pooling after blocks 3 and 4, dropout 0.1,
    a 128-unit dense layer and a 5-way softmax. ``filters`` and
    ``dense_units`` may be narrowed for toy checks and compute-bounded runs.
    """

    window: int
    kernel: int
    channels: int = 32
    filters: tuple = DEFAULT_FILTERS
    pooled: tuple = DEFAULT_POOLED
    dense_units: int = 128
    n_classes: int = 5
    dropout: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        object.__setattr__(self, "pooled", tuple(bool(p) for p in self.pooled))
        if len(self.filters) != len(self.pooled) or not self.filters:
            raise ValueError("filters and pooled must be equally long and non-empty")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.kernel}")
        npool = sum(self.pooled)
        if self.window < 2 ** npool or self.channels < 2 ** npool:
            raise ValueError(
                f"a {self.channels}x{self.window} input is too small for {npool} 2x2 pools")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.dropout}")
        if min(self.filters) < 1 or self.dense_units < 1 or self.n_classes < 2:
            raise ValueError("layer widths must be positive and n_classes >= 2")

    def block_shapes(self):
        """Output shape (H, W, C) of each convolutional block."""
        h, w = self.channels, self.window
        shapes = []
        for f, pooled in zip(self.filters, self.pooled):
            if pooled:
                h, w = h // 2, w // 2
            shapes.append((h, w, f))
        return shapes

    def param_shapes(self):
        """Ordered mapping of parameter name to shape (the on-disk order)."""
        shapes = {}
        cin = 1
        for i, f in enumerate(self.filters, start=1):
            shapes[f"conv{i}.w"] = (f, cin, self.kernel, self.kernel)
            shapes[f"conv{i}.b"] = (f,)
            cin = f
        shapes["dense1.w"] = (self.dense_units, cin)
        shapes["dense1.b"] = (self.dense_units,)
        shapes["dense2.w"] = (self.n_classes, self.dense_units)
        shapes["dense2.b"] = (self.n_classes,)
        return shapes


@dataclass
class Network:
    spec: NetworkSpec
    params: dict
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def copy(self):
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng.bit_generator.state
        return Network(self.spec, {k: v.copy() for k, v in self.params.items()}, rng)


@dataclass
class ForwardCache:
    """Intermediate activations recorded by a forward pass, needed by backward."""

    x: np.ndarray
    block_inputs: list
    block_acts: list
    masks: list
    pool_args: list
    pre_pool_shapes: list
    gmp_arg: np.ndarray
    gmp_in_shape: tuple
    features: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    probs: np.ndarray


def build_network(window, kernel, seed=0, **spec_kwargs):
    """Construct a network with uniform +-sqrt(6 / fan_in) weights and zero biases.

    Initial weights are rounded to float32 so a fresh network survives a
    model-file round trip unchanged.
    """
    spec = spec_kwargs.pop("spec", None) or NetworkSpec(window=window, kernel=kernel, **spec_kwargs)
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            lim = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-lim, lim, size=shape)
            params[name] = w.astype(np.float32).astype(np.float64)
    return Network(spec, params, rng)


def _as_batch(spec, frames):
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim == 4 and x.shape[-1] == 1:
        x = x[..., 0]
    if x.ndim != 3 or x.shape[1:] != (spec.channels, spec.window):
        raise ShapeError(
            f"frames of shape {np.shape(frames)} do not match a "
            f"{spec.channels}x{spec.window} input")
    return x[..., None]


def forward_batch(net, frames, mode="eval", masks=None):
    """Forward pass over a batch of K x T frames.

    In ``train`` mode dropout masks are drawn from ``net.rng`` unless
    ``masks`` (one array per block) is given. Returns (probs, cache).
    """
    spec, p = net.spec, net.params
    x = _as_batch(spec, frames)
    n = x.shape[0]
    train = mode == "train"
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    block_inputs, block_acts, used_masks, pool_args, pre_pool = [], [], [], [], []
    h = x
    for i, pooled in enumerate(spec.pooled):
        block_inputs.append(h)
        z = layers.conv2d(h, p[f"conv{i + 1}.w"], p[f"conv{i + 1}.b"])
        a = np.maximum(z, 0.0, out=z)
        block_acts.append(a)
        if train and spec.dropout > 0:
            m = masks[i] if masks is not None else layers.dropout_mask(a.shape, spec.dropout, net.rng)
            a = a * m
        else:
            m = None
        used_masks.append(m)
        pre_pool.append(a.shape)
        if pooled:
            a, arg = layers.maxpool2x2_with_arg(a)
        else:
            arg = None
        pool_args.append(arg)
        h = a
    feats, gmp_arg = layers.global_max_pool_with_arg(h)
    hidden_pre = feats @ p["dense1.w"].T + p["dense1.b"]
    hidden = np.maximum(hidden_pre, 0.0)
    logits = hidden @ p["dense2.w"].T + p["dense2.b"]
    probs = layers.softmax(logits)
    cache = ForwardCache(x, block_inputs, block_acts, used_masks, pool_args, pre_pool,
                         gmp_arg, h.shape, feats, hidden_pre, hidden, probs)
    return probs, cache


def predict_proba(net, frames, batch_size=256):
    """Eval-mode class probabilities for any number of frames, (N, C)."""
    x = np.asarray(frames, dtype=np.float64)
    out = np.empty((x.shape[0], net.spec.n_classes))
    for s in range(0, x.shape[0], batch_size):
        out[s:s + batch_size], _ = forward_batch(net, x[s:s + batch_size], "eval")
    return out


def forward(net, frame, mode="eval", masks=None):
    """Class probabilities for a single K x T (or K x T x 1) frame."""
    probs, _ = forward_batch(net, np.asarray(frame)[None], mode, masks)
    return probs[0]


def backward(net, cache, targets):
    """Mean cross-entropy over the batch and its exact parameter gradients.

    Returns (loss, grads) with ``grads`` keyed like ``net.params``.
    """
    spec, p = net.spec, net.params
    targets = np.asarray(targets, dtype=np.intp).reshape(-1)
    probs = cache.probs
    n = probs.shape[0]
    if targets.shape[0] != n:
        raise ShapeError(f"{targets.shape[0]} targets for a batch of {n}")
    picked = probs[np.arange(n), targets]
    loss = float(np.mean(-np.log(np.maximum(picked, 1e-12))))

    grads = {}
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    grads["dense2.w"] = dlogits.T @ cache.hidden
    grads["dense2.b"] = dlogits.sum(axis=0)
    dhidden = dlogits @ p["dense2.w"]
    dhidden *= cache.hidden_pre > 0
    grads["dense1.w"] = dhidden.T @ cache.features
    grads["dense1.b"] = dhidden.sum(axis=0)
    dfeat = dhidden @ p["dense1.w"]
    dh = layers.global_max_pool_backward(dfeat, cache.gmp_arg, cache.gmp_in_shape)

    for i in reversed(range(len(spec.pooled))):
        if spec.pooled[i]:
            dh = layers.maxpool2x2_backward(dh, cache.pool_args[i], cache.pre_pool_shapes[i])
        if cache.masks[i] is not None:
            dh = dh * cache.masks[i]
        dh = dh * (cache.block_acts[i] > 0)
        dx, dw, db = layers.conv2d_backward(
            dh, cache.block_inputs[i], p[f"conv{i + 1}.w"], need_dx=i > 0)
        grads[f"conv{i + 1}.w"] = dw
        grads[f"conv{i + 1}.b"] = db
        dh = dx
    return loss, {k: grads[k] for k in p}


def block_output_shapes(net, frame):
    """Shapes observed at each block output for one frame (diagnostic)."""
    _, cache = forward_batch(net, np.asarray(frame)[None], "eval")
    shapes = []
    for i, pooled in enumerate(net.spec.pooled):
        nxt = cache.block_inputs[i + 1] if i + 1 < len(cache.block_inputs) else None
        if nxt is not None:
            shapes.append(tuple(nxt.shape[1:]))
        else:
            shapes.append(tuple(cache.gmp_in_shape[1:]))
    return shapes

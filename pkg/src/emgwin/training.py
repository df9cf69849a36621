"""Stratified splitting, cross-entropy, Adam and the fixed-epoch training loop."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import evaluation
from .errors import NumericalError, ShapeError
from .nn.network import DEFAULT_FILTERS, backward, build_network, forward_batch, predict_proba

LOSS_CLAMP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 35
    train_fraction: float = 0.7
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train fraction must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epoch count must be >= 1")


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    test_accuracy: float = float("nan")
    test_f1: float = float("nan")
    confusion: np.ndarray = None
    seconds: float = 0.0
    seed: int = 0

    def values(self):
        """Everything except wall-clock time, for determinism comparisons."""
        return (tuple(self.train_loss), tuple(self.train_accuracy), tuple(self.val_loss),
                tuple(self.val_accuracy), self.test_accuracy, self.test_f1,
                None if self.confusion is None else self.confusion.tobytes(), self.seed)

    def write_curves(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"])
            for i, row in enumerate(zip(self.train_loss, self.train_accuracy,
                                        self.val_loss, self.val_accuracy), start=1):
                w.writerow([i, *[f"{v:.6f}" for v in row]])


@dataclass
class AdamState:
    m: dict
    v: dict


def split_frames(frames, fraction=0.7, seed=0):
    """Stratified, seeded train/test split of a FrameSet.

    Each class with n frames sends floor(fraction * n) (at least 1) to the
    training side. Both sides keep the original frame order.
    """
    if len(frames) == 0:
        raise ValueError("cannot split an empty frame set")
    rng = np.random.default_rng(seed)
    train_idx = []
    for c in np.unique(frames.labels):
        idx = np.flatnonzero(frames.labels == c)
        if idx.size < 2:
            raise ValueError(f"class {c} has {idx.size} frame(s); at least 2 are needed to split")
        n_train = max(1, int(np.floor(fraction * idx.size)))
        train_idx.append(rng.permutation(idx)[:n_train])
    train_idx = np.sort(np.concatenate(train_idx))
    mask = np.zeros(len(frames), dtype=bool)
    mask[train_idx] = True
    return frames.subset(train_idx), frames.subset(np.flatnonzero(~mask))


def cross_entropy(pred, target):
    return float(-np.log(max(float(pred[int(target)]), LOSS_CLAMP)))


def adam_init(params):
    return AdamState({k: np.zeros_like(v) for k, v in params.items()},
                     {k: np.zeros_like(v) for k, v in params.items()})


def adam_step(params, grads, state, t, config):
    """One bias-corrected Adam update (step index ``t`` starts at 1).

    Returns new (params, state); inputs are left untouched.
    """
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NumericalError(f"non-finite gradient at step {t} in {', '.join(bad)}")
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {k} has shape {g.shape}, parameter {p.shape}")
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * g * g
        new_p[k] = p - config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new_m[k], new_v[k] = m, v
    return new_p, AdamState(new_m, new_v)


def _evaluate(net, frames, batch_size=256):
    probs = np.empty((len(frames), net.spec.n_classes))
    for s in range(0, len(frames), batch_size):
        idx = np.arange(s, min(len(frames), s + batch_size))
        probs[idx] = predict_proba(net, frames.get(idx), batch_size)
    y = frames.labels
    loss = float(np.mean(-np.log(np.maximum(probs[np.arange(len(y)), y], LOSS_CLAMP))))
    return loss, probs.argmax(axis=1)


def train(frames, window, kernel, config=TrainConfig(), *, filters=DEFAULT_FILTERS,
          dense_units=128, test_frames=None):
    """Train a fresh network on ``frames`` for exactly ``config.epochs`` epochs.

    The frames are split 70/30 (``config.train_fraction``) unless
    ``test_frames`` is given. The held-out side provides the per-epoch
    validation curve and the final eval-mode test metrics.
    Returns (network, TrainReport).
    """
    t0 = time.perf_counter()
    k_ch, t_len = frames.frame_shape
    if t_len != window:
        raise ShapeError(f"frames have length {t_len}, network expects {window}")
    if np.unique(frames.labels).size < 2:
        raise ValueError("training needs at least two classes")
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    if test_frames is None:
        train_set, test_set = split_frames(frames, config.train_fraction, seeds[0])
    else:
        train_set, test_set = frames, test_frames
    net = build_network(window, kernel, seed=seeds[1], channels=k_ch, filters=filters,
                        dense_units=dense_units)
    rng = np.random.default_rng(seeds[2])
    net.rng = rng
    state = adam_init(net.params)
    report = TrainReport(seed=config.seed)
    step = 0
    n = len(train_set)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            x = train_set.get(idx)
            y = train_set.labels[idx]
            probs, cache = forward_batch(net, x, "train")
            loss, grads = backward(net, cache, y)
            if not np.isfinite(loss):
                raise NumericalError(f"loss became non-finite at step {step + 1}")
            step += 1
            net.params, state = adam_step(net.params, grads, state, step, config)
            loss_sum += loss * idx.size
            correct += int(np.sum(probs.argmax(axis=1) == y))
        report.train_loss.append(loss_sum / n)
        report.train_accuracy.append(correct / n)
        vloss, vpred = _evaluate(net, test_set)
        if not np.isfinite(vloss):
            raise NumericalError("validation loss is non-finite")
        report.val_loss.append(vloss)
        report.val_accuracy.append(float(np.mean(vpred == test_set.labels)))
    # the last validation pass already is the eval-mode test pass
    cm = evaluation.confusion(vpred, test_set.labels)
    report.confusion = cm
    report.test_accuracy = evaluation.accuracy(cm)
    report.test_f1 = evaluation.f1_macro(cm)
    report.seconds = time.perf_counter() - t0
    return net, report

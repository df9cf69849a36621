"""Seeded synthetic multichannel sEMG following a cue-rest acquisition protocol.

Each session alternates active trials (every active class appears
``trials_per_active_class`` times, in random order) with rest (NM) periods.
An active trial of class c is ``M_c @ w(t) * e(t)`` plus sensor noise: ``M_c``
is a subject-perturbed channels x 8 mixing matrix with spatially smooth
columns, ``w`` are 8 band-limited Gaussian carriers and ``e`` is a
trapezoidal envelope. Rest periods carry sensor noise only.

Carriers are drawn fresh for every trial and each class occupies its own
log-spaced sub-band of the carrier band. The spatial maps alone do not
survive class-wise z-scoring as something a translation-invariant CNN can
pick up, so the spectral signature is what keeps the task learnable.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dataio import NUM_CLASSES, EmgRecording
from .evaluation import confusion, accuracy
from .windowing import WindowParams, segment_many

N_SOURCES = 8
CARRIER_BAND = (20.0, 450.0)
RAMP_SECONDS = 0.5
SUBJECT_PERTURBATION = 0.35
GAIN_RANGE = (0.7, 1.3)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    subjects: int = 4
    sessions: int = 5
    trials_per_active_class: int = 10
    trial_duration: float = 5.0
    rest_duration: float = 5.0
    sample_rate: float = 1024.0
    channels: int = 32
    snr: float = 3.0
    scale: str = "full"

    def __post_init__(self):
        if self.scale not in ("full", "small"):
            raise ValueError(f"scale must be 'full' or 'small', got {self.scale!r}")
        for name in ("subjects", "sessions", "trials_per_active_class", "channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.trial_duration <= 0 or self.rest_duration <= 0:
            raise ValueError("durations must be positive")
        if self.sample_rate <= 0 or self.snr <= 0:
            raise ValueError("sample rate and SNR must be positive")

    def resolved(self):
        """The config actually generated: ``small`` forces 1 session, 3 trials, 512 Hz."""
        if self.scale == "small":
            return replace(self, sessions=1, trials_per_active_class=3, sample_rate=512.0)
        return self

    @property
    def trial_samples(self):
        return int(round(self.trial_duration * self.resolved().sample_rate))

    @property
    def rest_samples(self):
        return int(round(self.rest_duration * self.resolved().sample_rate))


def _class_patterns(rng, channels):
    """Spatially smooth mixing matrices, one per active class."""
    pos = np.arange(channels)[:, None]
    pats = []
    for _ in range(NUM_CLASSES - 1):
        centres = rng.uniform(0, channels - 1, N_SOURCES)
        widths = rng.uniform(1.5, 5.0, N_SOURCES)
        amps = rng.uniform(0.5, 1.5, N_SOURCES) * rng.choice([-1.0, 1.0], N_SOURCES)
        pats.append(amps * np.exp(-0.5 * ((pos - centres) / widths) ** 2))
    return np.stack(pats)


def class_bands(fs):
    """(low, high) carrier band in Hz for each active class, in class order."""
    lo, hi = CARRIER_BAND
    hi = min(hi, 0.45 * fs)
    edges = lo * (hi / lo) ** (np.arange(NUM_CLASSES + 1) / NUM_CLASSES)
    return [(edges[c - 1], edges[c + 1]) for c in range(1, NUM_CLASSES)]


def _carriers(rng, n, fs, band, count=N_SOURCES):
    spec = np.fft.rfft(rng.standard_normal((count, n)), axis=1)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    spec[:, (f < band[0]) | (f > band[1])] = 0.0
    w = np.fft.irfft(spec, n=n, axis=1)
    return w / w.std(axis=1, keepdims=True)


def _envelope(n, ramp):
    e = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        up = np.arange(1, ramp + 1) / ramp
        e[:ramp] = up
        e[n - ramp:] = up[::-1]
    return e


def _recording(cfg, patterns, subject, session):
    rng = np.random.default_rng([cfg.seed, 2, subject, session])
    fs = cfg.sample_rate
    nt = int(round(cfg.trial_duration * fs))
    nr = int(round(cfg.rest_duration * fs))
    order = rng.permutation(np.repeat(np.arange(1, NUM_CLASSES), cfg.trials_per_active_class))
    length = order.size * (nt + nr)
    labels = np.zeros(length, dtype=np.uint8)
    clean = np.zeros((cfg.channels, length))
    bands = class_bands(fs)
    env = _envelope(nt, int(round(RAMP_SECONDS * fs)))
    gains = rng.uniform(*GAIN_RANGE, order.size)
    for i, c in enumerate(order):
        a = i * (nt + nr)
        labels[a:a + nt] = c
        carriers = _carriers(rng, nt, fs, bands[c - 1])
        clean[:, a:a + nt] = (patterns[c - 1] @ carriers) * (gains[i] * env)
    active = labels > 0
    sig_rms = np.sqrt(np.mean(clean[:, active] ** 2))
    noise = rng.standard_normal(clean.shape) * (sig_rms / cfg.snr)
    samples = (clean + noise).astype(np.float32)
    return EmgRecording(f"S{subject + 1:02d}", f"R{session + 1:02d}", samples, labels, fs)


def generate(config=SynthConfig()):
    """Recordings ordered by (subject, session); identical bytes for identical configs."""
    cfg = config.resolved()
    base = _class_patterns(np.random.default_rng([cfg.seed, 0]), cfg.channels)
    out = []
    for s in range(cfg.subjects):
        srng = np.random.default_rng([cfg.seed, 1, s])
        scale = SUBJECT_PERTURBATION * np.abs(base).max()
        patterns = base + scale * srng.standard_normal(base.shape) * (np.abs(base) > 0.05)
        for j in range(cfg.sessions):
            out.append(_recording(cfg, patterns, s, j))
    return out


def separability_check(recordings, window=125, train_fraction=0.7, seed=0, shuffle_labels=False):
    """Nearest-centroid accuracy on per-window channel-RMS features.

    Windows of ``window`` samples without overlap, stratified 70/30 split.
    With ``shuffle_labels`` every window gets a uniformly random class
    (among those present), which should give chance accuracy.
    """
    from .training import split_frames

    frames = segment_many(recordings, WindowParams(window, 0.0))
    present = np.unique(frames.labels)
    if present.size < 2:
        raise ValueError("separability check needs at least two classes")
    if shuffle_labels:
        rng = np.random.default_rng([seed, 7])
        frames = type(frames)(frames._blocks, frames._block_index, frames._offsets,
                              rng.choice(present, len(frames)), frames.sources,
                              frames.starts, frames.params, frames.record_ids)
    train, test = split_frames(frames, train_fraction, seed)

    def rms(fs):
        return np.sqrt(np.mean(fs.data ** 2, axis=2))

    ftr, fte = rms(train), rms(test)
    classes = np.unique(train.labels)
    centroids = np.stack([ftr[train.labels == c].mean(axis=0) for c in classes])
    d = ((fte[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    pred = classes[d.argmin(axis=1)]
    return accuracy(confusion(pred, test.labels))

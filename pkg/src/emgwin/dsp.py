"""Power-line notch, Butterworth band-pass, zero-phase filtering and class-wise z-scoring."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataio import EmgRecording

# keep the band-pass upper edge at the same fraction of Nyquist as 500 Hz at 1024 Hz
NYQUIST_FRACTION = 500.0 / 512.0
SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class BiquadCascade:
    """Second-order sections, rows ``(b0, b1, b2, 1, a1, a2)``."""

    sos: np.ndarray

    def __post_init__(self):
        sos = np.array(self.sos, dtype=np.float64).reshape(-1, 6)
        if not np.all(np.isfinite(sos)):
            raise ValueError("filter coefficients must be finite")
        if not np.allclose(sos[:, 3], 1.0):
            raise ValueError("sections must be normalized to a0 = 1")
        sos.setflags(write=False)
        object.__setattr__(self, "sos", sos)

    @property
    def order(self):
        return 2 * self.sos.shape[0]

    def poles(self):
        return np.concatenate([np.roots([1.0, a1, a2]) for a1, a2 in self.sos[:, 4:6]])

    def is_stable(self):
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs, fs):
        """Complex frequency response at ``freqs`` (Hz)."""
        z = np.exp(-1j * 2 * np.pi * np.asarray(freqs, dtype=np.float64) / fs)
        h = np.ones_like(z)
        for b0, b1, b2, _, a1, a2 in self.sos:
            h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h

    def gain_db(self, freqs, fs):
        mag = np.abs(self.response(freqs, fs))
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(mag)


def design_notch(f0=50.0, fs=1024.0, q=30.0):
    """Single-biquad notch with a null at ``f0`` and unit gain at DC and Nyquist."""
    if not 0.0 < f0 < fs / 2.0:
        raise ValueError(f"notch frequency {f0} Hz must lie in (0, {fs / 2} Hz)")
    if q <= 0:
        raise ValueError("quality factor must be positive")
    w0 = 2.0 * np.pi * f0 / fs
    alpha = np.sin(w0) / (2.0 * q)
    c = np.cos(w0)
    a0 = 1.0 + alpha
    sos = [[1.0 / a0, -2.0 * c / a0, 1.0 / a0, 1.0, -2.0 * c / a0, (1.0 - alpha) / a0]]
    cascade = BiquadCascade(sos)
    assert cascade.is_stable()
    return cascade


def design_bandpass(lo=10.0, hi=500.0, fs=1024.0, order=4):
    """Butterworth band-pass (prototype order ``order``) as ``order`` biquads.

    Band edges are pre-warped for the bilinear transform, so the -3 dB points
    land exactly on ``lo`` and ``hi``.
    """
    if not 0.0 < lo < hi < fs / 2.0:
        raise ValueError(f"band edges must satisfy 0 < lo < hi < {fs / 2} Hz, got {lo}, {hi}")
    if order < 1:
        raise ValueError("order must be >= 1")
    k2 = 2.0 * fs
    wlo = k2 * np.tan(np.pi * lo / fs)
    whi = k2 * np.tan(np.pi * hi / fs)
    bw = whi - wlo
    w0sq = wlo * whi

    m = np.arange(1, order + 1)
    proto = np.exp(1j * np.pi * (2 * m + order - 1) / (2 * order))
    # s -> (s^2 + w0^2) / (s * bw): each prototype pole splits into two
    disc = np.sqrt((proto * bw) ** 2 - 4.0 * w0sq + 0j)
    spoles = np.concatenate([(proto * bw + disc) / 2.0, (proto * bw - disc) / 2.0])
    zpoles = (k2 + spoles) / (k2 - spoles)

    upper = zpoles[zpoles.imag > 1e-12]
    real = np.sort(zpoles[np.abs(zpoles.imag) <= 1e-12].real)
    sections = [(-2.0 * p.real, abs(p) ** 2) for p in upper]
    for i in range(0, len(real), 2):
        sections.append((-(real[i] + real[i + 1]), real[i] * real[i + 1]))
    if len(sections) != order:
        raise ArithmeticError("pole pairing failed")

    # each section gets one zero at z=1 and one at z=-1, scaled to unit gain at band centre
    fc = fs / np.pi * np.arctan(np.sqrt(w0sq) / k2)
    zc = np.exp(-1j * 2 * np.pi * fc / fs)
    sos = []
    for a1, a2 in sections:
        g = abs((1.0 + a1 * zc + a2 * zc * zc) / (1.0 - zc * zc))
        sos.append([g, 0.0, -g, 1.0, a1, a2])
    cascade = BiquadCascade(sos)
    if not cascade.is_stable():
        raise ArithmeticError("designed band-pass is unstable")
    return cascade


def _as_columns(signal):
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 1:
        return x[:, None], True
    if x.ndim == 2:
        return x, False
    raise ValueError(f"signal must be 1-D or (L, C), got shape {x.shape}")


def filter_forward_backward(cascade, signal):
    """Zero-phase filtering: run the cascade forward, reverse, run again, reverse.

    ``signal`` is a length-L series or an (L, C) array filtered column-wise.
    """
    x, vector = _as_columns(signal)
    if x.shape[0] <= 3 * cascade.order:
        raise ValueError(
            f"signal of {x.shape[0]} samples is too short for a filter of order {cascade.order}")
    y = _kernels.sosfilt(cascade.sos, x)
    y = _kernels.sosfilt(cascade.sos, y[::-1])[::-1]
    y = np.ascontiguousarray(y)
    return y[:, 0] if vector else y


def filter_recording(recording, cascade):
    y = filter_forward_backward(cascade, recording.samples.T)
    return recording.with_samples(np.ascontiguousarray(y.T))


def zscore_classwise(recording):
    """Normalize each (class, channel) group to zero mean and unit population std.

    Groups with std below 1e-12 are set to zero.
    """
    x = np.asarray(recording.samples, dtype=np.float64)
    out = np.empty_like(x)
    labels = recording.labels
    for c in np.unique(labels):
        idx = labels == c
        grp = x[:, idx]
        mu = grp.mean(axis=1, keepdims=True)
        sd = grp.std(axis=1, keepdims=True)
        ok = sd[:, 0] >= SIGMA_FLOOR
        res = np.zeros_like(grp)
        res[ok] = (grp[ok] - mu[ok]) / sd[ok]
        out[:, idx] = res
    return recording.with_samples(out)


def preprocess(recording, notch_hz=50.0, lo=10.0, hi=500.0, order=4, q=30.0):
    """Notch, then band-pass, then class-wise z-score.

    If ``hi`` is not below Nyquist (e.g. 500 Hz at 512 Hz sampling) it is
    lowered to the same fraction of Nyquist that 500 Hz is of 512 Hz.
    """
    fs = recording.sample_rate
    hi = min(hi, NYQUIST_FRACTION * fs / 2.0)
    rec = recording
    if notch_hz:
        rec = filter_recording(rec, design_notch(notch_hz, fs, q))
    rec = filter_recording(rec, design_bandpass(lo, hi, fs, order))
    return zscore_classwise(rec)

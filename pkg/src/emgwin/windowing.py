"""Sliding-window segmentation of labeled recordings into K x T frames."""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class WindowParams:
    """Window length T (samples) and overlap fraction f in [0, 1).

    Overlap is floor(f * T) samples, so T=150, f=0.75 gives 112, not 112.5.
    """

    window: int
    overlap_fraction: float = 0.0

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 1:
            raise ValueError(f"window length must be a positive integer, got {self.window}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError(f"overlap fraction must lie in [0, 1), got {self.overlap_fraction}")
        object.__setattr__(self, "window", int(self.window))
        object.__setattr__(self, "overlap_fraction", float(self.overlap_fraction))

    @property
    def overlap(self):
        # the epsilon keeps e.g. 0.29 * 100 from flooring to 28
        return min(self.window - 1, math.floor(self.overlap_fraction * self.window + 1e-9))

    @property
    def stride(self):
        return self.window - self.overlap


def frame_count(run_length, params):
    """Frames a constant-label run of ``run_length`` samples yields."""
    if run_length < params.window:
        return 0
    return (run_length - params.window) // params.stride + 1


def label_runs(labels):
    """Maximal constant-label runs as (start, stop, label) triples."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], edges))
    stops = np.concatenate((edges, [labels.size]))
    return [(int(a), int(b), int(labels[a])) for a, b in zip(starts, stops)]


class FrameSet:
    """Labeled K x T frames.

    Frame data lives in read-only source blocks and is gathered on access, so
    heavily overlapping frame sets cost no more memory than their recordings.
    Per frame the set records the class label, the index of its source
    recording (into ``record_ids``) and its start sample in that recording.
    """

    def __init__(self, blocks, block_index, offsets, labels, sources, starts, params, record_ids):
        self._blocks = blocks
        self._block_index = np.asarray(block_index, dtype=np.int64)
        self._offsets = np.asarray(offsets, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.sources = np.asarray(sources, dtype=np.int64)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.params = params
        self.record_ids = tuple(record_ids)
        for arr in (self.labels, self.sources, self.starts, self._block_index, self._offsets):
            arr.setflags(write=False)

    @classmethod
    def from_arrays(cls, frames, labels, sources, starts, params, record_ids):
        frames = np.asarray(frames, dtype=np.float64)
        n, k, t = frames.shape
        if t != params.window:
            raise ValueError(f"frames of length {t} do not match window {params.window}")
        block = np.ascontiguousarray(frames.transpose(1, 0, 2).reshape(k, n * t))
        block.setflags(write=False)
        return cls([block], np.zeros(n), np.arange(n) * t, labels, sources, starts,
                   params, record_ids)

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def frame_shape(self):
        k = self._blocks[0].shape[0] if self._blocks else 0
        return (k, self.params.window)

    def get(self, indices):
        """Copy of frames ``indices`` as an (n, K, T) float64 array."""
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        k, t = self.frame_shape
        out = np.empty((indices.size, k, t))
        blk = self._block_index[indices]
        off = self._offsets[indices]
        for b in np.unique(blk):
            sel = np.flatnonzero(blk == b)
            win = sliding_window_view(self._blocks[b], t, axis=1)  # (K, L-T+1, T)
            out[sel] = win[:, off[sel], :].transpose(1, 0, 2)
        return out

    @property
    def data(self):
        return self.get(np.arange(len(self)))

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        return FrameSet(self._blocks, self._block_index[indices], self._offsets[indices],
                        self.labels[indices], self.sources[indices], self.starts[indices],
                        self.params, self.record_ids)

    def class_counts(self, n_classes=5):
        return np.bincount(self.labels, minlength=n_classes)


def _readonly_block(samples):
    block = np.array(samples, dtype=np.float64, copy=True, order="C")
    block.setflags(write=False)
    return block


def segment(recording, params):
    """Frames of one recording; see :func:`segment_many`."""
    return segment_many([recording], params)


def segment_many(recordings, params):
    """Cut every maximal constant-label run of length R >= T into frames.

    Frames start at 0, S, 2S, ... within each run, so a run yields
    ``frame_count(R, params)`` frames and no frame straddles a label change.
    Order: recording, then run, then start.
    """
    blocks, block_idx, offsets, labels, sources, starts, ids = [], [], [], [], [], [], []
    t, s = params.window, params.stride
    for r, rec in enumerate(recordings):
        ids.append(rec.record_id)
        blocks.append(_readonly_block(rec.samples))
        for a, b, lab in label_runs(rec.labels):
            n = frame_count(b - a, params)
            if n == 0:
                continue
            st = a + s * np.arange(n)
            starts.append(st)
            offsets.append(st)
            labels.append(np.full(n, lab))
            sources.append(np.full(n, r))
            block_idx.append(np.full(n, r))
    if starts:
        cat = np.concatenate
        return FrameSet(blocks, cat(block_idx), cat(offsets), cat(labels), cat(sources),
                        cat(starts), params, ids)
    empty = np.zeros(0, dtype=np.int64)
    return FrameSet(blocks, empty, empty, empty, empty, empty, params, ids)

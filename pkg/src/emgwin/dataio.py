"""On-disk formats: recording datasets, frame dumps and model files.

Dataset directory::

    manifest.json           version, sample_rate_hz, num_channels, class_names,
                            recordings[{subject_id, session_id, num_samples,
                                        samples_file, labels_file}]
    <rec>.f32               little-endian float32, sample-major (channels inner)
    <rec>.u8                one uint8 class id per sample

Model file: ``EMGCNN1\\0`` magic, one UTF-8 JSON header line, then float32
little-endian weights per layer (conv [out][in][kh][kw] then bias, dense
[out][in] then bias).

Files hold float32; values round-trip bit-exactly when the in-memory samples
are float32-representable (as generated and loaded data always are).
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, LengthMismatchError, ShapeError, VersionError

CLASS_NAMES = ("NM", "WS", "WP", "HO", "HC")
NUM_CLASSES = len(CLASS_NAMES)
DATASET_VERSION = 1
MODEL_VERSION = 1
FRAMES_VERSION = 1
MODEL_MAGIC = b"EMGCNN1\x00"

_F32 = np.dtype("<f4")


def class_name(class_id):
    return CLASS_NAMES[int(class_id)]


def class_id(name):
    try:
        return CLASS_NAMES.index(name)
    except ValueError:
        raise KeyError(f"unknown class name {name!r}") from None


@dataclass(frozen=True, eq=False)
class EmgRecording:
    """One subject/session: a K x L signal matrix plus one class id per sample."""

    subject_id: str
    session_id: str
    samples: np.ndarray
    labels: np.ndarray
    sample_rate: float = 1024.0

    def __post_init__(self):
        samples = np.asarray(self.samples)
        labels = np.asarray(self.labels)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ShapeError(f"samples must be a K x L matrix with K >= 1, got {samples.shape}")
        if labels.ndim != 1 or labels.shape[0] != samples.shape[1]:
            raise LengthMismatchError(
                f"{labels.shape} labels for a recording of {samples.shape[1]} samples")
        if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            raise DataFormatError(f"labels outside 0..{NUM_CLASSES - 1}")
        if not self.sample_rate > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.issubdtype(samples.dtype, np.floating):
            samples = samples.astype(np.float64)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels.astype(np.uint8, copy=False))

    @property
    def num_channels(self):
        return self.samples.shape[0]

    @property
    def num_samples(self):
        return self.samples.shape[1]

    @property
    def record_id(self):
        return f"{self.subject_id}/{self.session_id}"

    def with_samples(self, samples):
        return EmgRecording(self.subject_id, self.session_id, samples, self.labels, self.sample_rate)


# --------------------------------------------------------------------------
# datasets

def _read_exact(path, dtype, count, what):
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"missing {what} file: {path}")
    raw = path.read_bytes()
    expected = count * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise LengthMismatchError(
            f"{path.name}: {len(raw)} bytes on disk, header implies {expected}")
    return np.frombuffer(raw, dtype=dtype).copy()


def load_dataset(path):
    """Read a dataset directory; recordings come back in manifest order."""
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.is_file():
        raise DataFormatError(f"no manifest.json in {path}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"malformed manifest {mpath}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise DataFormatError("manifest must be a JSON object")
    if manifest.get("version") != DATASET_VERSION:
        raise VersionError(f"unsupported dataset version {manifest.get('version')!r}")
    try:
        rate = float(manifest["sample_rate_hz"])
        k = int(manifest["num_channels"])
        names = tuple(manifest["class_names"])
        entries = manifest["recordings"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"manifest field missing or invalid: {exc}") from exc
    if names != CLASS_NAMES:
        raise DataFormatError(f"class table {names} differs from {CLASS_NAMES}")
    if rate <= 0 or k < 1:
        raise DataFormatError("sample rate and channel count must be positive")

    recordings = []
    for i, entry in enumerate(entries):
        try:
            n = int(entry["num_samples"])
            sfile, lfile = entry["samples_file"], entry["labels_file"]
            subject, session = str(entry["subject_id"]), str(entry["session_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"recording entry {i} malformed: {exc}") from exc
        flat = _read_exact(path / sfile, _F32, n * k, "samples")
        labels = _read_exact(path / lfile, np.uint8, n, "labels")
        if labels.size and labels.max() >= NUM_CLASSES:
            raise DataFormatError(f"{lfile}: class id {labels.max()} out of range")
        samples = flat.reshape(n, k).T.astype(np.float32)
        recordings.append(EmgRecording(subject, session, samples, labels, rate))
    return recordings


def save_dataset(recordings, path):
    """Write recordings (all sharing one rate and channel count) to ``path``."""
    recordings = list(recordings)
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    rate = recordings[0].sample_rate if recordings else 1024.0
    k = recordings[0].num_channels if recordings else 32
    entries = []
    for i, rec in enumerate(recordings):
        if rec.sample_rate != rate or rec.num_channels != k:
            raise DataFormatError("all recordings in a dataset must share rate and channel count")
        stem = f"rec{i:04d}"
        sfile, lfile = f"{stem}.f32", f"{stem}.u8"
        (path / sfile).write_bytes(np.ascontiguousarray(rec.samples.T, dtype=_F32).tobytes())
        (path / lfile).write_bytes(rec.labels.astype(np.uint8).tobytes())
        entries.append({
            "subject_id": rec.subject_id,
            "session_id": rec.session_id,
            "num_samples": int(rec.num_samples),
            "samples_file": sfile,
            "labels_file": lfile,
        })
    manifest = {
        "version": DATASET_VERSION,
        "sample_rate_hz": float(rate),
        "num_channels": int(k),
        "class_names": list(CLASS_NAMES),
        "recordings": entries,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# models

def _spec_header(spec):
    shapes = spec.param_shapes()
    layers = []
    for name in shapes:
        if name.endswith(".w"):
            base = name[:-2]
            layers.append({"name": base, "weight": list(shapes[name]),
                           "bias": list(shapes[base + ".b"])})
    return {
        "version": MODEL_VERSION,
        "window": spec.window,
        "kernel": spec.kernel,
        "channels": spec.channels,
        "filters": list(spec.filters),
        "pooled": list(spec.pooled),
        "dense_units": spec.dense_units,
        "n_classes": spec.n_classes,
        "dropout": spec.dropout,
        "layers": layers,
    }


def save_model(network, path):
    spec = network.spec
    header = _spec_header(spec)
    chunks = [MODEL_MAGIC, (json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8")]
    for name, shape in spec.param_shapes().items():
        arr = network.params[name]
        if arr.shape != shape:
            raise ShapeError(f"{name} has shape {arr.shape}, spec requires {shape}")
        chunks.append(np.ascontiguousarray(arr, dtype=_F32).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_model(path):
    from .nn.network import Network, NetworkSpec

    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"missing model file: {path}")
    raw = path.read_bytes()
    if not raw.startswith(MODEL_MAGIC):
        raise VersionError(f"{path.name}: not a model file (bad magic bytes)")
    nl = raw.find(b"\n", len(MODEL_MAGIC))
    if nl < 0:
        raise DataFormatError(f"{path.name}: truncated header")
    try:
        header = json.loads(raw[len(MODEL_MAGIC):nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path.name}: malformed header: {exc}") from exc
    if header.get("version") != MODEL_VERSION:
        raise VersionError(f"unsupported model version {header.get('version')!r}")
    try:
        spec = NetworkSpec(
            window=int(header["window"]), kernel=int(header["kernel"]),
            channels=int(header["channels"]), filters=tuple(header["filters"]),
            pooled=tuple(header["pooled"]), dense_units=int(header["dense_units"]),
            n_classes=int(header["n_classes"]), dropout=float(header["dropout"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path.name}: invalid architecture header: {exc}") from exc

    shapes = spec.param_shapes()
    declared = {}
    for layer in header.get("layers", []):
        declared[layer["name"] + ".w"] = tuple(layer["weight"])
        declared[layer["name"] + ".b"] = tuple(layer["bias"])
    if declared != shapes:
        raise ShapeError(f"{path.name}: layer shapes in header disagree with the architecture")
    payload = raw[nl + 1:]
    expected = sum(int(np.prod(s)) for s in shapes.values()) * 4
    if len(payload) != expected:
        raise ShapeError(
            f"{path.name}: weight payload is {len(payload)} bytes, header implies {expected}")
    params = {}
    offset = 0
    for name, shape in shapes.items():
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype=_F32, count=count, offset=offset)
        params[name] = arr.astype(np.float64).reshape(shape)
        offset += count * 4
    return Network(spec, params)


# --------------------------------------------------------------------------
# frame dumps

def save_frames(frameset, path):
    """Write a FrameSet: frames.json header plus frame-major float32/uint8 payloads.

    Within a frame, values are sample-major (channel index inner), as in datasets.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n = len(frameset)
    k, t = frameset.frame_shape
    with open(path / "frames.f32", "wb") as fh:
        for s in range(0, n, 1024):
            block = frameset.get(np.arange(s, min(n, s + 1024)))
            fh.write(np.ascontiguousarray(block.transpose(0, 2, 1), dtype=_F32).tobytes())
    (path / "labels.u8").write_bytes(frameset.labels.astype(np.uint8).tobytes())
    header = {
        "version": FRAMES_VERSION,
        "window": frameset.params.window,
        "overlap_fraction": frameset.params.overlap_fraction,
        "num_channels": k,
        "num_frames": n,
        "class_names": list(CLASS_NAMES),
        "records": list(frameset.record_ids),
        "frame_record": [int(v) for v in frameset.sources],
        "frame_start": [int(v) for v in frameset.starts],
    }
    (path / "frames.json").write_text(json.dumps(header) + "\n", encoding="utf-8")


def load_frames(path):
    from .windowing import FrameSet, WindowParams

    path = Path(path)
    hpath = path / "frames.json"
    if not hpath.is_file():
        raise DataFormatError(f"no frames.json in {path}")
    try:
        header = json.loads(hpath.read_text(encoding="utf-8"))
        if header.get("version") != FRAMES_VERSION:
            raise VersionError(f"unsupported frame dump version {header.get('version')!r}")
        n, k, t = int(header["num_frames"]), int(header["num_channels"]), int(header["window"])
        params = WindowParams(t, float(header["overlap_fraction"]))
        records = list(header["records"])
        src = np.asarray(header["frame_record"], dtype=np.int64)
        starts = np.asarray(header["frame_start"], dtype=np.int64)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"malformed frames.json: {exc}") from exc
    data = _read_exact(path / "frames.f32", _F32, n * k * t, "frames")
    labels = _read_exact(path / "labels.u8", np.uint8, n, "labels")
    if src.shape != (n,) or starts.shape != (n,):
        raise LengthMismatchError("frame index lists do not match the frame count")
    frames = data.reshape(n, t, k).transpose(0, 2, 1).astype(np.float64)
    return FrameSet.from_arrays(frames, labels, src, starts, params, records)


def write_json(path, obj):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)

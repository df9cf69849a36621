"""The window-length x overlap x kernel x subject x seed experiment grid."""

import csv
import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evaluation
from .dataio import CLASS_NAMES
from .errors import DataFormatError, EmgwinError
from .nn.network import DEFAULT_FILTERS
from .training import TrainConfig, train
from .windowing import WindowParams, segment_many

log = logging.getLogger(__name__)

RESULT_FIELDS = ["subject", "window", "overlap_frac", "kernel", "seed", "accuracy", "f1_macro",
                 *[f"acc_{c}" for c in CLASS_NAMES], "seconds"]
CONFUSION_FIELDS = ["subject", "window", "overlap_frac", "kernel", "seed", "true_class",
                    *CLASS_NAMES]


@dataclass(frozen=True)
class SweepGrid:
    windows: tuple = (125, 150, 175)
    overlaps: tuple = (0.0, 0.25, 0.5, 0.75)
    kernels: tuple = (3, 5, 7)
    seeds: tuple = (0,)
    subjects: tuple = None  # None: every subject in the dataset

    def __post_init__(self):
        for name in ("windows", "overlaps", "kernels", "seeds"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"grid axis {name} is empty")
            if len(set(vals)) != len(vals):
                raise ValueError(f"grid axis {name} has duplicates")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "overlaps", tuple(float(f) for f in self.overlaps))
        for f in self.overlaps:
            WindowParams(min(self.windows), f)
        if self.subjects is not None:
            object.__setattr__(self, "subjects", tuple(self.subjects))

    def cells(self, subjects):
        keys = [(s, t, f, k, seed) for s in subjects for t in self.windows
                for f in self.overlaps for k in self.kernels for seed in self.seeds]
        return sorted(keys)


@dataclass
class SweepResult:
    subject: str
    window: int
    overlap: float
    kernel: int
    seed: int
    accuracy: float
    f1_macro: float
    per_class: np.ndarray
    confusion: np.ndarray = None
    seconds: float = 0.0

    @property
    def key(self):
        return (self.subject, self.window, self.overlap, self.kernel, self.seed)


def cell_seed(master_seed, subject, window, overlap, seed):
    """Training seed for a cell.

    The kernel size is deliberately left out so that networks of different
    kernel sizes see the same split, shuffles and dropout stream.
    """
    text = f"{master_seed}|{subject}|{window}|{overlap!r}|{seed}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


def _fmt_overlap(f):
    return f"{float(f):g}"


def _pct(v):
    return "nan" if not np.isfinite(v) else f"{100.0 * v:.2f}"


def _result_row(r, record_time=True):
    return [r.subject, r.window, _fmt_overlap(r.overlap), r.kernel, r.seed, _pct(r.accuracy),
            _pct(r.f1_macro), *[_pct(v) for v in r.per_class],
            f"{r.seconds:.2f}" if record_time else "0.00"]


def _confusion_rows(r):
    base = [r.subject, r.window, _fmt_overlap(r.overlap), r.kernel, r.seed]
    return [[*base, name, *[int(v) for v in row]] for name, row in zip(CLASS_NAMES, r.confusion)]


def result_paths(out_path):
    out = Path(out_path)
    stem = out.with_suffix("")
    return out, Path(f"{stem}.confusion.csv"), Path(f"{stem}.failures.txt")


def read_results(path):
    """Load a results CSV (and its sibling confusion CSV when present)."""
    out, cpath, _ = result_paths(path)
    if not out.is_file():
        raise DataFormatError(f"missing results file: {out}")
    results = []
    with open(out, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_FIELDS:
            raise DataFormatError(f"{out.name}: unexpected header {reader.fieldnames}")
        for row in reader:
            try:
                results.append(SweepResult(
                    row["subject"], int(row["window"]), float(row["overlap_frac"]),
                    int(row["kernel"]), int(row["seed"]), float(row["accuracy"]) / 100,
                    float(row["f1_macro"]) / 100,
                    np.array([float(row[f"acc_{c}"]) / 100 for c in CLASS_NAMES]),
                    seconds=float(row["seconds"])))
            except (KeyError, ValueError) as exc:
                raise DataFormatError(f"{out.name}: bad row {row}: {exc}") from exc
    if cpath.is_file():
        mats = {}
        with open(cpath, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["subject"], int(row["window"]), float(row["overlap_frac"]),
                       int(row["kernel"]), int(row["seed"]))
                mats.setdefault(key, {})[row["true_class"]] = [int(row[c]) for c in CLASS_NAMES]
        for r in results:
            rows = mats.get(r.key)
            if rows and len(rows) == len(CLASS_NAMES):
                r.confusion = np.array([rows[c] for c in CLASS_NAMES])
    return results


def write_results(results, path, record_time=True):
    out, cpath, _ = result_paths(path)
    results = sorted(results, key=lambda r: r.key)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in results:
            w.writerow(_result_row(r, record_time))
    if all(r.confusion is not None for r in results):
        with open(cpath, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CONFUSION_FIELDS)
            for r in results:
                w.writerows(_confusion_rows(r))


# --------------------------------------------------------------------------
# cell execution

_WORKER = {}


def _init_worker(by_subject):
    _WORKER["data"] = by_subject


def run_cell(key, recordings, template, filters=DEFAULT_FILTERS, dense_units=128, curves_dir=None):
    """Segment, split, train and evaluate one grid cell."""
    subject, window, overlap, kernel, seed = key
    t0 = time.perf_counter()
    frames = segment_many(recordings, WindowParams(window, overlap))
    cfg = replace(template, seed=cell_seed(template.seed, subject, window, overlap, seed))
    _, report = train(frames, window, kernel, cfg, filters=filters, dense_units=dense_units)
    cm = report.confusion
    acc, f1 = evaluation.accuracy(cm), evaluation.f1_macro(cm)
    if not (np.isfinite(acc) and np.isfinite(f1)):
        raise ArithmeticError("non-finite metrics")
    if curves_dir is not None:
        name = f"curve_{subject}_T{window}_f{_fmt_overlap(overlap)}_k{kernel}_s{seed}.csv"
        report.write_curves(Path(curves_dir) / name)
    return SweepResult(subject, window, overlap, kernel, seed, acc, f1,
                       evaluation.per_class_accuracy(cm), cm, time.perf_counter() - t0)


def _worker_cell(key, template, filters, dense_units, curves_dir):
    try:
        return key, run_cell(key, _WORKER["data"][key[0]], template, filters, dense_units,
                             curves_dir), None
    except Exception as exc:  # recorded per cell, the sweep carries on
        return key, None, f"{type(exc).__name__}: {exc}"


def run_grid(recordings, grid=SweepGrid(), template=TrainConfig(), *, out_path=None, jobs=1,
             filters=DEFAULT_FILTERS, dense_units=128, curves_dir=None, record_time=True):
    """Run every cell of ``grid`` with one network per subject.

    With ``out_path``, cells already present in that results CSV are skipped
    and new rows are appended as they finish; the file is rewritten sorted at
    the end. Failed cells go to a sibling ``.failures.txt`` and are retried
    on the next run. Returns all results (resumed and new), sorted by key.
    """
    by_subject = {}
    for rec in recordings:
        by_subject.setdefault(rec.subject_id, []).append(rec)
    subjects = grid.subjects if grid.subjects is not None else tuple(by_subject)
    missing = [s for s in subjects if s not in by_subject]
    if missing:
        raise DataFormatError(f"subjects not in dataset: {missing}")
    keys = grid.cells(subjects)

    done = {}
    if out_path is not None and Path(out_path).is_file():
        wanted = set(keys)
        for r in read_results(out_path):
            if r.key in wanted:
                done[r.key] = r
    todo = [k for k in keys if k not in done]
    log.info("%d cells, %d already done, %d to run", len(keys), len(done), len(todo))
    if curves_dir is not None:
        Path(curves_dir).mkdir(parents=True, exist_ok=True)

    failures = []
    fresh = {}
    out_fh = None
    if out_path is not None:
        out, _, fail_path = result_paths(out_path)
        new_file = not out.is_file()
        out_fh = open(out, "a", newline="")
        writer = csv.writer(out_fh, lineterminator="\n")
        if new_file:
            writer.writerow(RESULT_FIELDS)

    def collect(key, result, err):
        if err is not None:
            failures.append((key, err))
            log.warning("cell %s failed: %s", key, err)
            return
        fresh[key] = result
        if out_fh is not None:
            writer.writerow(_result_row(result, record_time))
            out_fh.flush()

    try:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(jobs, initializer=_init_worker,
                                     initargs=({s: by_subject[s] for s in subjects},)) as ex:
                futs = [ex.submit(_worker_cell, k, template, filters, dense_units, curves_dir)
                        for k in todo]
                for fut in futs:
                    collect(*fut.result())
        else:
            _init_worker(by_subject)
            for k in todo:
                collect(*_worker_cell(k, template, filters, dense_units, curves_dir))
    finally:
        if out_fh is not None:
            out_fh.close()

    results = sorted([*done.values(), *fresh.values()], key=lambda r: r.key)
    if out_path is not None:
        write_results(results, out_path, record_time)
        if failures:
            with open(fail_path, "a") as fh:
                for key, err in failures:
                    fh.write(f"subject={key[0]} window={key[1]} overlap={_fmt_overlap(key[2])} "
                             f"kernel={key[3]} seed={key[4]}: {err}\n")
    return results


# --------------------------------------------------------------------------
# aggregation

def _metric(r, metric):
    if metric in ("accuracy", "acc"):
        return r.accuracy
    if metric in ("f1", "f1_macro"):
        return r.f1_macro
    raise ValueError(f"unknown metric {metric!r}")


def mean_metric(results, metric, **match):
    vals = [_metric(r, metric) for r in results
            if all(getattr(r, k) == v for k, v in match.items())]
    if not vals:
        raise KeyError(f"no results for {match}")
    return float(np.mean(vals))


def improvement_delta(results, metric="accuracy", f_hi=0.75, f_lo=0.0):
    """Per (window, kernel): mean metric at ``f_hi`` minus at ``f_lo``, in percentage points."""
    table = {}
    for t, k in sorted({(r.window, r.kernel) for r in results}):
        try:
            hi = mean_metric(results, metric, window=t, kernel=k, overlap=f_hi)
            lo = mean_metric(results, metric, window=t, kernel=k, overlap=f_lo)
        except KeyError:
            raise KeyError(f"missing overlap {f_hi} or {f_lo} cells for T={t}, k={k}") from None
        table[(t, k)] = 100.0 * (hi - lo)
    return table


def kernel_trend(results, metric="f1", overlap=0.75):
    """Per window: {kernel: subject/seed-averaged metric in percent} at one overlap."""
    kernels = sorted({r.kernel for r in results})
    table = {}
    for t in sorted({r.window for r in results}):
        row = {}
        for k in kernels:
            try:
                row[k] = 100.0 * mean_metric(results, metric, window=t, kernel=k, overlap=overlap)
            except KeyError:
                raise KeyError(f"missing cells for T={t}, k={k}, overlap={overlap}") from None
        table[t] = row
    return table


def summary_table(results):
    """Mean accuracy and macro-F1 (percent) per (window, overlap, kernel)."""
    rows = []
    for t, f, k in sorted({(r.window, r.overlap, r.kernel) for r in results}):
        rows.append((t, f, k, 100 * mean_metric(results, "accuracy", window=t, overlap=f, kernel=k),
                     100 * mean_metric(results, "f1", window=t, overlap=f, kernel=k)))
    return rows

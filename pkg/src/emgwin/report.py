"""CSV tables and SVG figures rendered from sweep results and learning curves.

Everything here is a pure function of the input CSV files.
"""

import csv
from pathlib import Path

import numpy as np

from . import evaluation, sweep
from .dataio import CLASS_NAMES


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "emgwin"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    _plt().close(fig)


def _fmt_f(f):
    return "0T" if f == 0 else f"{f:g}T"


def overlap_bars(results, window, path):
    """Accuracy and F1 against overlap for each kernel at one window length."""
    plt = _plt()
    kernels = sorted({r.kernel for r in results if r.window == window})
    overlaps = sorted({r.overlap for r in results if r.window == window}, reverse=True)
    fig, axes = plt.subplots(1, len(kernels), figsize=(4 * len(kernels), 3.4), squeeze=False)
    x = np.arange(len(overlaps))
    for ax, k in zip(axes[0], kernels):
        acc = [100 * sweep.mean_metric(results, "accuracy", window=window, kernel=k, overlap=f)
               for f in overlaps]
        f1 = [100 * sweep.mean_metric(results, "f1", window=window, kernel=k, overlap=f)
              for f in overlaps]
        ax.bar(x - 0.2, acc, 0.4, color="tab:blue", label="accuracy")
        ax.bar(x + 0.2, f1, 0.4, color="tab:red", label="F1")
        ax.set_xticks(x, [_fmt_f(f) for f in overlaps])
        ax.set_ylim(0, 100)
        ax.set_title(f"kernel={k}")
        ax.set_xlabel("overlap")
    axes[0][0].set_ylabel("%")
    axes[0][0].legend(loc="lower right", fontsize=8)
    fig.suptitle(f"window length T={window}")
    fig.tight_layout()
    _save(fig, path)


def f1_vs_window(results, path, overlap=0.75):
    plt = _plt()
    table = sweep.kernel_trend(results, "f1", overlap)
    windows = sorted(table)
    kernels = sorted(next(iter(table.values())))
    fig, ax = plt.subplots(figsize=(5, 3.4))
    x = np.arange(len(windows))
    width = 0.8 / len(kernels)
    for i, k in enumerate(kernels):
        ax.bar(x + (i - (len(kernels) - 1) / 2) * width, [table[t][k] for t in windows], width,
               label=f"kernel={k}")
    ax.set_xticks(x, [str(t) for t in windows])
    ax.set_xlabel("window length T")
    ax.set_ylabel("macro F1 (%)")
    ax.set_ylim(0, 100)
    ax.set_title(f"F1 by kernel at overlap {_fmt_f(overlap)}")
    ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def confusion_heatmap(matrix_pct, title, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    ax.imshow(matrix_pct, vmin=0, vmax=100, cmap="Blues")
    n = len(CLASS_NAMES)
    ax.set_xticks(range(n), CLASS_NAMES)
    ax.set_yticks(range(n), CLASS_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(n):
        for j in range(n):
            v = matrix_pct[i, j]
            ax.text(j, i, f"{v:.1f}", ha="center", va="center", fontsize=7,
                    color="white" if v > 60 else "black")
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def learning_curves(curve_csv, path):
    plt = _plt()
    with open(curve_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ep = [int(r["epoch"]) for r in rows]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.2))
    a1.plot(ep, [float(r["train_loss"]) for r in rows], label="train")
    a1.plot(ep, [float(r["val_loss"]) for r in rows], label="validation")
    a1.set_xlabel("epoch")
    a1.set_ylabel("loss")
    a1.legend(fontsize=8)
    a2.plot(ep, [float(r["train_accuracy"]) for r in rows], label="train")
    a2.plot(ep, [float(r["val_accuracy"]) for r in rows], label="validation")
    a2.set_xlabel("epoch")
    a2.set_ylabel("accuracy")
    a2.set_ylim(0, 1)
    fig.suptitle(Path(curve_csv).stem, fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def build_report(results_csv, plots_dir, curves_dir=None, confusion_window=175,
                 confusion_cells=((3, 0.0), (3, 0.75), (7, 0.0), (7, 0.75))):
    """Write summary tables and figures; returns the list of files written."""
    results = sweep.read_results(results_csv)
    if not results:
        raise ValueError(f"{results_csv} holds no results")
    out = Path(plots_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    summary = out / "summary.csv"
    _write_rows(summary, ["window", "overlap_frac", "kernel", "accuracy", "f1_macro"],
                [(t, f"{f:g}", k, f"{a:.2f}", f"{f1:.2f}")
                 for t, f, k, a, f1 in sweep.summary_table(results)])
    written.append(summary)

    overlaps = {r.overlap for r in results}
    if {0.0, 0.75} <= overlaps:
        rows = []
        for (t, k), d_acc in sweep.improvement_delta(results, "accuracy").items():
            d_f1 = sweep.improvement_delta(results, "f1")[(t, k)]
            rows.append((t, k, f"{d_acc:.2f}", f"{d_f1:.2f}"))
        path = out / "overlap_delta.csv"
        _write_rows(path, ["window", "kernel", "delta_accuracy_pp", "delta_f1_pp"], rows)
        written.append(path)

    for t in sorted({r.window for r in results}):
        path = out / f"overlap_T{t}.svg"
        overlap_bars(results, t, path)
        written.append(path)

    if 0.75 in overlaps:
        table = sweep.kernel_trend(results, "f1", 0.75)
        kernels = sorted(next(iter(table.values())))
        path = out / "kernel_f1.csv"
        _write_rows(path, ["window", *[f"k{k}" for k in kernels]],
                    [(t, *[f"{table[t][k]:.2f}" for k in kernels]) for t in sorted(table)])
        written.append(path)
        path = out / "f1_vs_window.svg"
        f1_vs_window(results, path)
        written.append(path)

    for k, f in confusion_cells:
        cells = [r for r in results if r.window == confusion_window and r.kernel == k
                 and r.overlap == f and r.confusion is not None]
        if not cells:
            continue
        avg = evaluation.average_subjectwise([r.confusion for r in cells])
        stem = f"confusion_T{confusion_window}_k{k}_f{f:g}"
        evaluation.write_confusion_csv(avg, out / f"{stem}.csv")
        confusion_heatmap(avg, f"T={confusion_window}, kernel={k}, overlap={_fmt_f(f)} "
                               f"(mean of {len(cells)})", out / f"{stem}.svg")
        written += [out / f"{stem}.csv", out / f"{stem}.svg"]

    if curves_dir is not None and Path(curves_dir).is_dir():
        for csv_path in sorted(Path(curves_dir).glob("*.csv")):
            path = out / f"{csv_path.stem}.svg"
            learning_curves(csv_path, path)
            written.append(path)
    return written

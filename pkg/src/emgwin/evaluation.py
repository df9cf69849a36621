"""Confusion matrices, accuracy, macro-F1 and subject-wise averaging."""

import csv

import numpy as np

from .dataio import CLASS_NAMES, NUM_CLASSES


def confusion(preds, truths, n_classes=NUM_CLASSES):
    """Counts matrix with rows = true class, columns = predicted class."""
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    truths = np.asarray(truths, dtype=np.int64).reshape(-1)
    if preds.shape != truths.shape:
        raise ValueError(f"{preds.size} predictions for {truths.size} truths")
    if preds.size == 0:
        raise ValueError("cannot build a confusion matrix from empty lists")
    if min(preds.min(), truths.min()) < 0 or max(preds.max(), truths.max()) >= n_classes:
        raise ValueError(f"class ids must lie in 0..{n_classes - 1}")
    return np.bincount(truths * n_classes + preds, minlength=n_classes * n_classes).reshape(
        n_classes, n_classes)


def _checked(cm):
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {cm.shape}")
    total = cm.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    return cm, total


def accuracy(cm):
    cm, total = _checked(cm)
    return float(np.trace(cm) / total)


def per_class_f1(cm):
    """F1 per class; a class with precision + recall = 0 scores 0."""
    cm, _ = _checked(cm)
    cm = cm.astype(np.float64)
    tp = np.diag(cm)
    pred_tot = cm.sum(axis=0)
    true_tot = cm.sum(axis=1)
    precision = np.divide(tp, pred_tot, out=np.zeros_like(tp), where=pred_tot > 0)
    recall = np.divide(tp, true_tot, out=np.zeros_like(tp), where=true_tot > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)


def f1_macro(cm):
    """Unweighted mean of the per-class F1 scores over every class in the matrix."""
    return float(per_class_f1(cm).mean())


def per_class_accuracy(cm):
    """Recall of each class (diagonal over row sum); NaN for classes never seen."""
    cm, _ = _checked(cm)
    cm = cm.astype(np.float64)
    rows = cm.sum(axis=1)
    out = np.full(cm.shape[0], np.nan)
    np.divide(np.diag(cm), rows, out=out, where=rows > 0)
    return out


def row_normalize(cm):
    """Rows as percentages of their totals."""
    cm = np.asarray(cm, dtype=np.float64)
    rows = cm.sum(axis=1, keepdims=True)
    if np.any(rows == 0):
        raise ValueError("confusion matrix has an all-zero row")
    return 100.0 * cm / rows


def average_subjectwise(matrices):
    """Entrywise mean of row-normalized (percentage) matrices."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("need at least one confusion matrix")
    return np.mean([row_normalize(m) for m in matrices], axis=0)


def write_confusion_csv(cm, path, class_names=CLASS_NAMES):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["true\\pred", *class_names])
        for name, row in zip(class_names, np.asarray(cm)):
            w.writerow([name, *[_fmt(v) for v in row]])


def read_confusion_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def _fmt(v):
    if float(v).is_integer():
        return str(int(v))
    return f"{float(v):.4f}"

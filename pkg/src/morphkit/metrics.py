"""Classification metrics: overall accuracy, macro-averaged class-wise
precision and recall, and their harmonic-mean F1.

F1 here is the harmonic mean of *macro* precision and *macro* recall, not
the mean of per-class F1 scores; the two differ on imbalanced data. A class
with zero predictions (or zero support) contributes 0 to the corresponding
macro average and is flagged in ``undefined_classes``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, LengthMismatch

__all__ = ["MetricsReport", "compute_metrics"]


@dataclass
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    f1: float
    confusion: np.ndarray  # [truth, prediction] counts
    undefined_classes: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "f1": self.f1,
            "confusion": self.confusion.tolist(),
            "undefined_classes": self.undefined_classes,
        }


def compute_metrics(predictions, truths, num_classes: int) -> MetricsReport:
    """Confusion-matrix metrics over integer class ids.

    0/0 precision or recall is treated as 0 and the class id recorded in
    ``undefined_classes``.
    """
    preds = np.asarray(predictions, dtype=int)
    ts = np.asarray(truths, dtype=int)
    if preds.shape != ts.shape:
        raise LengthMismatch(f"{preds.shape} predictions vs {ts.shape} truths")
    if preds.size == 0:
        raise EmptyInput("nothing to score")
    if preds.min() < 0 or preds.max() >= num_classes or ts.min() < 0 or ts.max() >= num_classes:
        raise ValueError(f"class ids outside [0, {num_classes})")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (ts, preds), 1)

    diag = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)

    undefined = sorted(set(np.nonzero(predicted == 0)[0]) | set(np.nonzero(support == 0)[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, diag / np.where(predicted > 0, predicted, 1), 0.0)
        recall = np.where(support > 0, diag / np.where(support > 0, support, 1), 0.0)

    macro_p = float(precision.mean())
    macro_r = float(recall.mean())
    f1 = 2.0 * macro_p * macro_r / (macro_p + macro_r) if (macro_p + macro_r) > 0 else 0.0
    return MetricsReport(
        accuracy=float((preds == ts).mean()),
        macro_precision=macro_p,
        macro_recall=macro_r,
        f1=float(f1),
        confusion=confusion,
        undefined_classes=[int(u) for u in undefined],
    )

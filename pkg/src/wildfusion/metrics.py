"""Confusion matrix and the classification metric suite.

Convention: ``counts[actual, predicted]``.  Rates whose denominator is zero
evaluate to 0 and the class is flagged in ``no_support``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

RATE_NAMES = ("precision", "recall", "f1", "fpr", "fnr")


class ConfusionMatrix:
    def __init__(self, num_classes: int | None = None, counts=None):
        if counts is not None:
            counts = np.asarray(counts)
            if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
                raise ValueError(f"confusion matrix must be square, got {counts.shape}")
            if (counts < 0).any():
                raise ValueError("confusion counts must be non-negative")
            self.counts = counts.astype(np.int64)
        else:
            if num_classes is None or num_classes < 1:
                raise ValueError("num_classes must be positive")
            self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    @classmethod
    def from_predictions(cls, actual, predicted, num_classes: int) -> "ConfusionMatrix":
        m = cls(num_classes)
        actual, predicted = np.asarray(actual), np.asarray(predicted)
        if actual.shape != predicted.shape:
            raise ValueError("actual and predicted differ in length")
        if actual.size and (min(actual.min(), predicted.min()) < 0 or max(actual.max(), predicted.max()) >= num_classes):
            raise ValueError(f"class index outside [0, {num_classes})")
        np.add.at(m.counts, (actual, predicted), 1)
        return m

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accumulate(self, actual: int, predicted: int) -> "ConfusionMatrix":
        c = self.num_classes
        if not (0 <= actual < c and 0 <= predicted < c):
            raise ValueError(f"class out of range [0, {c}): actual={actual}, predicted={predicted}")
        self.counts[actual, predicted] += 1
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge matrices of different sizes")
        return ConfusionMatrix(counts=self.counts + other.counts)

    __add__ = merge

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def accumulate(matrix: ConfusionMatrix, actual: int, predicted: int) -> ConfusionMatrix:
    return matrix.accumulate(actual, predicted)


def _div(num, den):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


@dataclass
class MetricReport:
    per_class: dict  # rate name -> array over classes; also "tp", "fp", "fn", "tn", "support", "accuracy"
    macro: dict
    overall_accuracy: float
    kappa: float
    no_support: list = field(default_factory=list)
    undefined: dict = field(default_factory=dict)  # rate name -> classes whose rate hit 0/0
    class_names: list | None = None

    def to_dict(self) -> dict:
        names = self.class_names or [str(i) for i in range(len(self.per_class["tp"]))]
        classes = []
        for i, name in enumerate(names):
            rec = {"class": name}
            for key in ("support", "tp", "fp", "fn", "tn"):
                rec[key] = int(self.per_class[key][i])
            for key in RATE_NAMES + ("accuracy",):
                rec[key] = float(self.per_class[key][i])
            rec["no_support"] = i in self.no_support
            classes.append(rec)
        return {
            "overall_accuracy": self.overall_accuracy,
            "kappa": self.kappa,
            "macro": {k: float(v) for k, v in self.macro.items()},
            "classes": classes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def per_class_counts(matrix: ConfusionMatrix):
    c = matrix.counts
    n = c.sum()
    tp = np.diag(c).astype(np.int64)
    fn = c.sum(axis=1) - tp
    fp = c.sum(axis=0) - tp
    tn = n - tp - fn - fp
    return tp, fp, fn, tn


def per_class_metrics(matrix: ConfusionMatrix):
    """Per-class rates plus their macro averages over classes with support.

    Returns ``(per_class, macro, no_support, undefined)``.
    """
    if matrix.total == 0:
        raise ValueError("empty confusion matrix")
    tp, fp, fn, tn = per_class_counts(matrix)
    per = {
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "tn": tn,
        "support": tp + fn,
        "precision": _div(tp, tp + fp),
        "recall": _div(tp, tp + fn),
        "f1": _div(2 * tp, 2 * tp + fp + fn),
        "fpr": _div(fp, fp + tn),
        "fnr": _div(fn, fn + tp),
    }
    per["accuracy"] = per["recall"]
    dens = {"precision": tp + fp, "recall": tp + fn, "f1": 2 * tp + fp + fn, "fpr": fp + tn, "fnr": fn + tp}
    undefined = {k: [int(i) for i in np.flatnonzero(d == 0)] for k, d in dens.items()}
    no_support = [int(i) for i in np.flatnonzero((tp + fn == 0) & (tp + fp == 0))]
    has_support = (tp + fn) > 0
    macro = {k: float(per[k][has_support].mean()) if has_support.any() else 0.0 for k in RATE_NAMES}
    return per, macro, no_support, undefined


def overall_accuracy(matrix: ConfusionMatrix) -> float:
    if matrix.total == 0:
        raise ValueError("overall accuracy of an empty confusion matrix is undefined")
    return float(np.trace(matrix.counts) / matrix.total)


def cohen_kappa(matrix: ConfusionMatrix) -> float:
    """``(p_o - p_e) / (1 - p_e)`` from the row and column marginals."""
    n = matrix.total
    if n == 0:
        raise ValueError("kappa of an empty confusion matrix is undefined")
    c = matrix.counts.astype(float)
    p_o = np.trace(c) / n
    p_e = float(c.sum(axis=1) @ c.sum(axis=0)) / (n * n)
    if p_e == 1.0:
        raise ValueError("kappa undefined: chance agreement p_e = 1")
    return float((p_o - p_e) / (1.0 - p_e))


def metric_report(matrix: ConfusionMatrix, class_names=None) -> MetricReport:
    per, macro, no_support, undefined = per_class_metrics(matrix)
    try:
        kappa = cohen_kappa(matrix)
    except ValueError:
        # A single-class evaluation set; report agreement as perfect or none.
        kappa = 1.0 if overall_accuracy(matrix) == 1.0 else 0.0
    return MetricReport(
        per_class=per,
        macro=macro,
        overall_accuracy=overall_accuracy(matrix),
        kappa=kappa,
        no_support=no_support,
        undefined=undefined,
        class_names=list(class_names) if class_names is not None else None,
    )

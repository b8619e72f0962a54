"""Classification metrics and report rendering.

The report lists one row per class (precision, recall, F1, support) followed
by accuracy, macro-average F1, and weighted-average F1 rows. Zero
denominators yield metric 0 and set a per-class flag.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidityError


def confusion_matrix(y_true, y_pred, labels) -> np.ndarray:
    """K x K counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValidityError("y_true and y_pred must have equal length")
    if y_true.size == 0:
        raise ValidityError("empty input")
    index = {label: i for i, label in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true.tolist(), y_pred.tolist()):
        if t not in index or p not in index:
            raise ValidityError(f"label {t if t not in index else p!r} not in label list")
        matrix[index[t], index[p]] += 1
    return matrix


@dataclass
class ClassificationReport:
    labels: list
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    accuracy: float
    macro_f1: float
    weighted_f1: float
    zero_division_flags: list[bool]

    def to_dict(self) -> dict:
        return {
            "labels": [str(l) for l in self.labels],
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "zero_division_flags": self.zero_division_flags,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationReport":
        return cls(**d)


def classification_report(y_true, y_pred, labels=None) -> ClassificationReport:
    """Per-class precision/recall/F1 plus accuracy, macro F1, weighted F1."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if labels is None:
        labels = sorted(set(y_true.tolist()) | set(y_pred.tolist()))
    matrix = confusion_matrix(y_true, y_pred, labels)

    precision, recall, f1, support, flags = [], [], [], [], []
    for i in range(len(labels)):
        tp = matrix[i, i]
        fp = matrix[:, i].sum() - tp
        fn = matrix[i, :].sum() - tp
        flag = False
        if tp + fp == 0:
            p = 0.0
            flag = True
        else:
            p = tp / (tp + fp)
        if tp + fn == 0:
            r = 0.0
            flag = True
        else:
            r = tp / (tp + fn)
        f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(f))
        support.append(int(matrix[i, :].sum()))
        flags.append(flag)

    total = matrix.sum()
    accuracy = float(np.trace(matrix) / total)
    macro_f1 = float(np.mean(f1))
    weights = np.asarray(support, dtype=float)
    weighted_f1 = float(np.dot(weights, f1) / weights.sum()) if weights.sum() else 0.0
    return ClassificationReport(
        labels=list(labels), precision=precision, recall=recall, f1=f1,
        support=support, accuracy=accuracy, macro_f1=macro_f1,
        weighted_f1=weighted_f1, zero_division_flags=flags,
    )


def accuracy_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise ValidityError("empty input")
    return float(np.mean(y_true == y_pred))


def weighted_f1_score(y_true, y_pred) -> float:
    return classification_report(y_true, y_pred).weighted_f1


def resolve_objective(name: str):
    if name == "accuracy":
        return accuracy_score
    if name == "weighted_f1":
        return weighted_f1_score
    raise ValidityError(f"unknown objective {name!r}")


def render_report(report: ClassificationReport) -> str:
    """Fixed-width text table: class rows then Acc / MF1 / WF1 rows."""
    width = max([len(str(l)) for l in report.labels] + [5])
    lines = [f"{'Class':<{width}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}  {'S':>6}"]
    for i, label in enumerate(report.labels):
        flag = " *" if report.zero_division_flags[i] else ""
        lines.append(
            f"{str(label):<{width}}  {report.precision[i]:>9.4f}  {report.recall[i]:>9.4f}"
            f"  {report.f1[i]:>9.4f}  {report.support[i]:>6d}{flag}"
        )
    total = sum(report.support)
    lines.append(f"{'Acc':<{width}}  {'':>9}  {'':>9}  {report.accuracy:>9.4f}  {total:>6d}")
    lines.append(f"{'MF1':<{width}}  {'':>9}  {'':>9}  {report.macro_f1:>9.4f}  {total:>6d}")
    lines.append(f"{'WF1':<{width}}  {'':>9}  {'':>9}  {report.weighted_f1:>9.4f}  {total:>6d}")
    if any(report.zero_division_flags):
        lines.append("* zero denominator; metric reported as 0")
    return "\n".join(lines) + "\n"


def report_to_json(report: ClassificationReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=1)


def report_from_json(text: str) -> ClassificationReport:
    return ClassificationReport.from_dict(json.loads(text))


def confusion_to_csv(matrix: np.ndarray, labels) -> str:
    """Rows = true class, columns = predicted class."""
    lines = ["true\\pred," + ",".join(str(l) for l in labels)]
    for i, label in enumerate(labels):
        lines.append(str(label) + "," + ",".join(str(int(v)) for v in matrix[i]))
    return "\n".join(lines) + "\n"

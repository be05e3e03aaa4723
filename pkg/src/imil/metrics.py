"""Performance and calibration metrics: accuracy, AUROC, ECE, ROC curve data."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .exceptions import UndefinedMetricError, ValidationError

if TYPE_CHECKING:
    from .training import PredictionRecord


@dataclass(frozen=True)
class CalibrationBin:
    index: int
    lower: float
    upper: float
    n: int
    acc: float
    conf: float


@dataclass
class EvalReport:
    accuracy: float
    auroc: float
    ece: float
    bins: list[CalibrationBin]
    roc_points: list[tuple[float, float, float]]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auroc": self.auroc,
            "ece": self.ece,
            "bins": [asdict(b) for b in self.bins],
            "roc_points": [list(p) for p in self.roc_points],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            accuracy=d["accuracy"],
            auroc=d["auroc"],
            ece=d["ece"],
            bins=[CalibrationBin(**b) for b in d.get("bins", [])],
            roc_points=[tuple(p) for p in d.get("roc_points", [])],
        )

    def write_csv(self, bins_path: Path, roc_path: Path) -> None:
        with open(bins_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "lower", "upper", "n", "acc", "conf"])
            for b in self.bins:
                w.writerow([b.index, b.lower, b.upper, b.n, b.acc, b.conf])
        with open(roc_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["fpr", "tpr", "threshold"])
            for fpr, tpr, thr in self.roc_points:
                w.writerow([fpr, tpr, thr])


def accuracy(records: Sequence["PredictionRecord"]) -> float:
    """Fraction of records whose predicted label equals the true label."""
    if not records:
        raise ValidationError("accuracy undefined for an empty record list")
    correct = sum(1 for r in records if r.predicted_label == r.true_label)
    return correct / len(records)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their positions."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUROC: P(score_pos > score_neg), ties counting one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC requires at least one sample of each class")
    ranks = _midranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


def ece(
    confidences: Sequence[float],
    correct: Sequence[bool],
    num_bins: int,
) -> tuple[float, list[CalibrationBin]]:
    """Expected calibration error over equal-width confidence bins.

    Bin b covers (lower, upper]; the first bin additionally includes 0.
    Empty bins contribute 0 and are reported with acc = conf = 0.
    """
    confidences = np.asarray(confidences, dtype=float)
    correct = np.asarray(correct, dtype=bool)
    if confidences.shape != correct.shape:
        raise ValidationError("confidences and correct must have equal length")
    if num_bins < 1:
        raise ValidationError(f"num_bins must be at least 1, got {num_bins}")
    if confidences.size == 0:
        raise ValidationError("ece undefined for empty input")
    if np.any(confidences < 0) or np.any(confidences > 1):
        raise ValidationError("confidences must lie in [0, 1]")
    n = confidences.size
    # (lower, upper] per bin, 0 folded into bin 0.
    idx = np.ceil(confidences * num_bins).astype(int) - 1
    idx = np.clip(idx, 0, num_bins - 1)
    total = 0.0
    bins: list[CalibrationBin] = []
    for b in range(num_bins):
        in_bin = idx == b
        n_b = int(in_bin.sum())
        if n_b > 0:
            acc_b = float(correct[in_bin].mean())
            conf_b = float(confidences[in_bin].mean())
            total += (n_b / n) * abs(acc_b - conf_b)
        else:
            acc_b = 0.0
            conf_b = 0.0
        bins.append(
            CalibrationBin(
                index=b,
                lower=b / num_bins,
                upper=(b + 1) / num_bins,
                n=n_b,
                acc=acc_b,
                conf=conf_b,
            )
        )
    return total, bins


def roc_points(
    scores: Sequence[float], labels: Sequence[int]
) -> list[tuple[float, float, float]]:
    """ROC curve points (fpr, tpr, threshold) at every distinct score.

    Starts at (0, 0) with threshold +inf and ends at (1, 1); trapezoidal area
    over the points equals the Mann-Whitney AUROC.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC requires at least one sample of each class")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    points: list[tuple[float, float, float]] = [(0.0, 0.0, float("inf"))]
    tp = 0
    fp = 0
    i = 0
    while i < len(sorted_scores):
        thr = sorted_scores[i]
        while i < len(sorted_scores) and sorted_scores[i] == thr:
            if sorted_labels[i] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_neg, tp / n_pos, float(thr)))
    return points


def trapezoid_area(points: Sequence[tuple[float, float, float]]) -> float:
    """Trapezoidal area under (fpr, tpr) points sorted by fpr."""
    area = 0.0
    for (x0, y0, _), (x1, y1, _) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area

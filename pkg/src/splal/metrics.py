"""Evaluation suite: confusion matrix, macro rates, one-vs-rest AUC, ROC points.

All multi-class rates are macro averages of per-class one-vs-rest values.
AUC uses the Mann-Whitney convention (half credit for ties): exact
midrank computation for up to 10^4 samples, trapezoid integration over
sorted thresholds beyond that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, InputDomainError

EXACT_AUC_LIMIT = 10_000


def confusion(predictions: np.ndarray, truths: np.ndarray, num_classes: int) -> np.ndarray:
    """Count matrix indexed (true class, predicted class)."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise InputDomainError("predictions and truths must have equal length")
    if predictions.size and (
        predictions.min() < 0 or predictions.max() >= num_classes
        or truths.min() < 0 or truths.max() >= num_classes
    ):
        raise InputDomainError("class id out of range")
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (truths, predictions), 1)
    return matrix


@dataclass
class SummaryMetrics:
    accuracy: float
    macro_f1: float
    macro_precision: float
    macro_recall: float
    macro_specificity: float
    per_class: list[dict] = field(default_factory=list)
    zero_support_classes: list[int] = field(default_factory=list)


def summary(matrix: np.ndarray) -> SummaryMetrics:
    """Macro one-vs-rest rates from a confusion matrix.

    Classes with zero support contribute F1 = 0 and are flagged.
    """
    matrix = np.asarray(matrix, dtype=np.int64)
    total = matrix.sum()
    if total == 0:
        raise InputDomainError("empty confusion matrix")
    k = matrix.shape[0]
    accuracy = float(np.trace(matrix) / total)
    per_class = []
    zero_support = []
    f1s, precs, recs, specs = [], [], [], []
    for c in range(k):
        tp = int(matrix[c, c])
        fn = int(matrix[c].sum() - tp)
        fp = int(matrix[:, c].sum() - tp)
        tn = int(total - tp - fn - fp)
        support = tp + fn
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        specificity = tn / (tn + fp) if (tn + fp) > 0 else 0.0
        f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) > 0 else 0.0
        if support == 0:
            zero_support.append(c)
            f1 = 0.0
        per_class.append(
            {
                "class": c, "support": support, "tp": tp, "fp": fp, "fn": fn, "tn": tn,
                "precision": precision, "recall": recall,
                "specificity": specificity, "f1": f1,
            }
        )
        f1s.append(f1)
        precs.append(precision)
        recs.append(recall)
        specs.append(specificity)
    return SummaryMetrics(
        accuracy=accuracy,
        macro_f1=float(np.mean(f1s)),
        macro_precision=float(np.mean(precs)),
        macro_recall=float(np.mean(recs)),
        macro_specificity=float(np.mean(specs)),
        per_class=per_class,
        zero_support_classes=zero_support,
    )


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def binary_auc_exact(scores: np.ndarray, positives: np.ndarray) -> float:
    """P(score_pos > score_neg) + half tie credit, via midranks."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUC needs at least one positive and one negative")
    ranks = _midranks(scores)
    rank_sum = ranks[positives].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores: np.ndarray, positives: np.ndarray) -> list[tuple[float, float, float]]:
    """(threshold, FPR, TPR) at every distinct score, thresholds descending."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    points = [(float("inf"), 0.0, 0.0)]
    order = np.argsort(-scores, kind="mergesort")
    tp = fp = 0
    i = 0
    while i < len(order):
        threshold = scores[order[i]]
        while i < len(order) and scores[order[i]] == threshold:
            if positives[order[i]]:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((float(threshold), fp / n_neg, tp / n_pos))
    return points


def binary_auc_trapezoid(scores: np.ndarray, positives: np.ndarray) -> float:
    pts = roc_points(scores, positives)
    auc = 0.0
    for (t0, fpr0, tpr0), (t1, fpr1, tpr1) in zip(pts, pts[1:]):
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0
    return float(auc)


@dataclass
class AucReport:
    macro_auc: float
    per_class_auc: dict[int, float]
    excluded_classes: list[int]
    roc: dict[int, list[tuple[float, float, float]]]


def auc_ovr(scores: np.ndarray, truths: np.ndarray, strict: bool = False) -> AucReport:
    """Macro one-vs-rest AUC over a (N, K) score matrix.

    Classes without both a positive and a negative are excluded and
    flagged, unless strict mode turns that into an error.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.int64)
    n, k = scores.shape
    per_class: dict[int, float] = {}
    roc: dict[int, list[tuple[float, float, float]]] = {}
    excluded: list[int] = []
    for c in range(k):
        positives = truths == c
        n_pos = int(positives.sum())
        if n_pos == 0 or n_pos == n:
            if strict:
                raise EvaluationError(f"class {c} lacks positives or negatives")
            excluded.append(c)
            continue
        col = scores[:, c]
        if n <= EXACT_AUC_LIMIT:
            per_class[c] = binary_auc_exact(col, positives)
        else:
            per_class[c] = binary_auc_trapezoid(col, positives)
        roc[c] = roc_points(col, positives)
    if not per_class:
        raise EvaluationError("no class is evaluable for AUC")
    macro = float(np.mean(list(per_class.values())))
    return AucReport(macro_auc=macro, per_class_auc=per_class, excluded_classes=excluded, roc=roc)

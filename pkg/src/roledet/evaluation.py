"""Cross-validation folds, weighted metrics, top-k and confidence-threshold analysis.

The threshold rule reproduces the selective-prediction analysis: below a
confidence cut-off tau, an incorrect top-1 prediction is replaced by the
model's second choice. Note the "or is correct" clause consults ground
truth, so thresholded metrics are an analysis view, not a deployable
decision rule; reports flag them as label-dependent.
"""

from __future__ import annotations

import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .corpus import N_ROLES, ROLE_NAMES


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    probs: np.ndarray
    top1: int
    top1_confidence: float


def make_predictions(sample_ids: Sequence[str], probs: np.ndarray) -> list[Prediction]:
    """Wrap probability rows; top-1 is the argmax with ties to the lowest index."""
    probs = np.asarray(probs, dtype=np.float64)
    top1 = probs.argmax(axis=1)
    return [
        Prediction(
            sample_id=sid,
            probs=probs[i],
            top1=int(top1[i]),
            top1_confidence=float(probs[i, top1[i]]),
        )
        for i, sid in enumerate(sample_ids)
    ]


@dataclass(frozen=True)
class ThresholdPolicy:
    calibration_class: int = 1  # victim
    percentile: float = 25.0

    def __post_init__(self):
        if not 0.0 < self.percentile < 100.0:
            raise ValueError("percentile must be in (0, 100)")


def stratified_kfold(labels: Sequence[int], k: int, seed: int) -> list[np.ndarray]:
    """k disjoint index folds with per-class counts differing by at most one.

    Classes are shuffled independently with one seeded stream and dealt in
    chunks; classes smaller than k trigger a warning and spread as evenly as
    possible (some folds receive none).
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < k:
        warnings.warn(
            f"smallest class has {int(counts.min())} members < k={k}; "
            "some folds will lack that class",
            stacklevel=2,
        )
    for cls in classes.tolist():
        idx = rng.permutation(np.flatnonzero(labels == cls))
        base, extra = divmod(len(idx), k)
        start = 0
        for f in range(k):
            size = base + (1 if f < extra else 0)
            folds[f].extend(idx[start : start + size].tolist())
            start += size
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def _resolve_labels(
    predictions: Sequence[Prediction], labels: Mapping[str, int]
) -> np.ndarray:
    out = np.empty(len(predictions), dtype=np.int64)
    for i, pred in enumerate(predictions):
        if pred.sample_id not in labels:
            raise ValueError(f"no ground-truth label for sample id '{pred.sample_id}'")
        out[i] = labels[pred.sample_id]
    return out


def tally(true: np.ndarray, predicted: np.ndarray, n_classes: int = N_ROLES) -> np.ndarray:
    """Confusion counts; rows are true classes, columns predicted."""
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (true, predicted), 1)
    return matrix


def confusion(
    predictions: Sequence[Prediction], labels: Mapping[str, int], n_classes: int = N_ROLES
) -> np.ndarray:
    true = _resolve_labels(predictions, labels)
    predicted = np.array([p.top1 for p in predictions], dtype=np.int64)
    return tally(true, predicted, n_classes)


@dataclass
class BasicMetrics:
    accuracy: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray


def weighted_metrics(matrix: np.ndarray) -> BasicMetrics:
    """Per-class precision/recall/F1 (0/0 defined as 0) and support-weighted averages."""
    matrix = np.asarray(matrix, dtype=np.float64)
    tp = np.diag(matrix)
    support = matrix.sum(axis=1)
    predicted = matrix.sum(axis=0)
    total = matrix.sum()

    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)

    weights = support / total if total > 0 else support
    return BasicMetrics(
        accuracy=float(tp.sum() / total) if total > 0 else 0.0,
        precision_weighted=float((precision * weights).sum()),
        recall_weighted=float((recall * weights).sum()),
        f1_weighted=float((f1 * weights).sum()),
        precision=precision,
        recall=recall,
        f1=f1,
        support=matrix.sum(axis=1).astype(np.int64),
    )


def topk_adjusted(
    predictions: Sequence[Prediction], labels: Mapping[str, int], k: int = 2
) -> np.ndarray:
    """Adjusted labels: the true class if it ranks in the top k, else the top-1.

    Probability ties rank the lower class index first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    true = _resolve_labels(predictions, labels)
    adjusted = np.empty(len(predictions), dtype=np.int64)
    for i, pred in enumerate(predictions):
        ranking = np.argsort(-pred.probs, kind="stable")[:k]
        adjusted[i] = true[i] if true[i] in ranking else pred.top1
    return adjusted


def calibrate_threshold(
    predictions: Sequence[Prediction],
    labels: Mapping[str, int],
    policy: ThresholdPolicy,
) -> float:
    """Interpolated percentile of top-1 confidence over correctly classified
    calibration-class samples."""
    true = _resolve_labels(predictions, labels)
    confidences = [
        p.top1_confidence
        for p, t in zip(predictions, true)
        if p.top1 == t == policy.calibration_class
    ]
    if not confidences:
        raise ValueError(
            f"no correctly classified samples of class {policy.calibration_class}; "
            "choose another calibration class or a global percentile"
        )
    return float(np.percentile(confidences, policy.percentile))


def threshold_adjusted(
    predictions: Sequence[Prediction], labels: Mapping[str, int], tau: float
) -> tuple[np.ndarray, float]:
    """Second-choice substitution below tau, plus the label-free rejection rate.

    A prediction keeps its top-1 when confident (>= tau) or already correct;
    otherwise the second-highest-probability class is used. The rejection
    rate counts confidences below tau regardless of correctness.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    true = _resolve_labels(predictions, labels)
    adjusted = np.empty(len(predictions), dtype=np.int64)
    rejected = 0
    for i, pred in enumerate(predictions):
        if pred.top1_confidence < tau:
            rejected += 1
        if pred.top1_confidence >= tau or pred.top1 == true[i]:
            adjusted[i] = pred.top1
        else:
            adjusted[i] = np.argsort(-pred.probs, kind="stable")[1]
    rate = rejected / len(predictions) if predictions else 0.0
    return adjusted, rate


def ecdf(values: Sequence[float]) -> np.ndarray:
    """(value, cumulative fraction) step points over the sorted distinct values."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("ecdf of empty sequence")
    uniq, counts = np.unique(arr, return_counts=True)
    fractions = counts.cumsum() / arr.size
    return np.column_stack([uniq, fractions])


# ---------------------------------------------------------------------------
# Report assembly


@dataclass
class ClassMetrics:
    label: int
    name: str
    support: int
    precision: float
    recall: float
    f1: float
    top2_f1: float
    thr_precision: float
    thr_recall: float
    thr_f1: float
    rejection_rate: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "name": self.name,
            "support": self.support,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "top2_f1": self.top2_f1,
            "thresholded": {
                "precision": self.thr_precision,
                "recall": self.thr_recall,
                "f1": self.thr_f1,
            },
            "rejection_rate": self.rejection_rate,
        }


@dataclass
class MetricsReport:
    accuracy: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    top2_accuracy: float
    top2_f1_weighted: float
    thr_accuracy: float
    thr_precision_weighted: float
    thr_recall_weighted: float
    thr_f1_weighted: float
    tau: float
    rejection_rate: float
    per_class: list[ClassMetrics] = field(default_factory=list)
    confusion: np.ndarray | None = None
    confusion_thresholded: np.ndarray | None = None

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_weighted": self.precision_weighted,
            "recall_weighted": self.recall_weighted,
            "f1_weighted": self.f1_weighted,
            "top2_accuracy": self.top2_accuracy,
            "top2_f1_weighted": self.top2_f1_weighted,
            "thresholded": {
                "note": "label-dependent analysis metric (substitution keeps correct top-1)",
                "accuracy": self.thr_accuracy,
                "precision_weighted": self.thr_precision_weighted,
                "recall_weighted": self.thr_recall_weighted,
                "f1_weighted": self.thr_f1_weighted,
            },
            "tau": self.tau,
            "rejection_rate": self.rejection_rate,
            "per_class": [c.as_dict() for c in self.per_class],
        }


def evaluate_predictions(
    predictions: Sequence[Prediction],
    labels: Mapping[str, int],
    tau: float,
    n_classes: int = N_ROLES,
) -> MetricsReport:
    """Full metric bundle for one prediction set at a fixed threshold tau."""
    true = _resolve_labels(predictions, labels)
    top1 = np.array([p.top1 for p in predictions], dtype=np.int64)
    conf = np.array([p.top1_confidence for p in predictions])

    base_matrix = tally(true, top1, n_classes)
    base = weighted_metrics(base_matrix)

    top2 = topk_adjusted(predictions, labels, k=2)
    top2_m = weighted_metrics(tally(true, top2, n_classes))

    thr_labels, rejection = threshold_adjusted(predictions, labels, tau)
    thr_matrix = tally(true, thr_labels, n_classes)
    thr = weighted_metrics(thr_matrix)

    per_class = []
    for c in range(n_classes):
        in_class = true == c
        class_rr = float((conf[in_class] < tau).mean()) if in_class.any() else 0.0
        per_class.append(
            ClassMetrics(
                label=c,
                name=ROLE_NAMES[c] if c < len(ROLE_NAMES) else str(c),
                support=int(base.support[c]),
                precision=float(base.precision[c]),
                recall=float(base.recall[c]),
                f1=float(base.f1[c]),
                top2_f1=float(top2_m.f1[c]),
                thr_precision=float(thr.precision[c]),
                thr_recall=float(thr.recall[c]),
                thr_f1=float(thr.f1[c]),
                rejection_rate=class_rr,
            )
        )

    return MetricsReport(
        accuracy=base.accuracy,
        precision_weighted=base.precision_weighted,
        recall_weighted=base.recall_weighted,
        f1_weighted=base.f1_weighted,
        top2_accuracy=top2_m.accuracy,
        top2_f1_weighted=top2_m.f1_weighted,
        thr_accuracy=thr.accuracy,
        thr_precision_weighted=thr.precision_weighted,
        thr_recall_weighted=thr.recall_weighted,
        thr_f1_weighted=thr.f1_weighted,
        tau=tau,
        rejection_rate=rejection,
        per_class=per_class,
        confusion=base_matrix,
        confusion_thresholded=thr_matrix,
    )

"""Evaluation metrics: confusion matrix, per-class precision/recall/F1,
support-weighted group precision, and Cohen's kappa agreement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .corpus import (
    EMOTIONS,
    EMOTION_INDEX,
    NEGATIVE_EMOTIONS,
    POSITIVE_EMOTIONS,
    EmotionLabel,
)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int
    # True when precision is 0/0 (class never predicted) and reported as 0.
    precision_undefined: bool = False


@dataclass(frozen=True)
class GroupPrecision:
    """Support-weighted mean of per-class precision over an emotion group.

    Classes absent from the evaluation set are excluded from the average and
    listed in ``absent``. When every group class is absent the value is 0.0
    and ``undefined`` is set.
    """

    value: float
    support: int
    absent: tuple[str, ...] = ()
    undefined: bool = False


@dataclass(frozen=True)
class MetricsReport:
    confusion: np.ndarray  # (9, 9); rows = true class, cols = predicted
    per_class: dict[EmotionLabel, ClassMetrics]
    negative: GroupPrecision
    positive: GroupPrecision
    neutral_precision: float
    accuracy: float
    n_examples: int

    def summary(self) -> dict:
        """JSON-friendly view used for run histories and reports."""
        return {
            "accuracy": self.accuracy,
            "n_examples": self.n_examples,
            "neutral_precision": self.neutral_precision,
            "negative_weighted_precision": self.negative.value,
            "positive_weighted_precision": self.positive.value,
            "per_class": {
                e.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for e, m in self.per_class.items()
            },
        }


def confusion_matrix(
    true_idx: Sequence[int], pred_idx: Sequence[int], n_classes: int = len(EMOTIONS)
) -> np.ndarray:
    if len(true_idx) != len(pred_idx):
        raise ValueError("true and predicted label sequences differ in length")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(true_idx, pred_idx):
        cm[t, p] += 1
    return cm


def _group_precision(
    group: frozenset[EmotionLabel], per_class: dict[EmotionLabel, ClassMetrics]
) -> GroupPrecision:
    present = [e for e in EMOTIONS if e in group and per_class[e].support > 0]
    absent = tuple(e.value for e in EMOTIONS if e in group and per_class[e].support == 0)
    total = sum(per_class[e].support for e in present)
    if total == 0:
        return GroupPrecision(value=0.0, support=0, absent=absent, undefined=True)
    weighted = sum(per_class[e].support * per_class[e].precision for e in present)
    return GroupPrecision(value=weighted / total, support=total, absent=absent)


def report_from_confusion(cm: np.ndarray) -> MetricsReport:
    """Full metrics report from a 9x9 confusion matrix (rows = true)."""
    cm = np.asarray(cm, dtype=np.int64)
    if cm.shape != (len(EMOTIONS), len(EMOTIONS)):
        raise ValueError(f"confusion matrix must be {len(EMOTIONS)}x{len(EMOTIONS)}")
    per_class: dict[EmotionLabel, ClassMetrics] = {}
    for e in EMOTIONS:
        k = EMOTION_INDEX[e]
        tp = int(cm[k, k])
        support = int(cm[k, :].sum())
        predicted = int(cm[:, k].sum())
        undefined = predicted == 0
        precision = 0.0 if undefined else tp / predicted
        recall = 0.0 if support == 0 else tp / support
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        per_class[e] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=f1,
            support=support,
            predicted=predicted,
            precision_undefined=undefined,
        )
    n = int(cm.sum())
    accuracy = float(np.trace(cm)) / n if n else 0.0
    return MetricsReport(
        confusion=cm,
        per_class=per_class,
        negative=_group_precision(NEGATIVE_EMOTIONS, per_class),
        positive=_group_precision(POSITIVE_EMOTIONS, per_class),
        neutral_precision=per_class[EmotionLabel.NEUTRAL].precision,
        accuracy=accuracy,
        n_examples=n,
    )


def report_from_labels(
    true_labels: Sequence[EmotionLabel], pred_labels: Sequence[EmotionLabel]
) -> MetricsReport:
    true_idx = [EMOTION_INDEX[e] for e in true_labels]
    pred_idx = [EMOTION_INDEX[e] for e in pred_labels]
    return report_from_confusion(confusion_matrix(true_idx, pred_idx))


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement: kappa = (p_o - p_e) / (1 - p_e).

    ``p_o`` is the observed agreement rate and ``p_e`` the chance agreement
    from the two annotators' marginal label frequencies. Degenerate case:
    when both marginals are the same point mass, p_e = 1 forces p_o = 1 and
    kappa is 1.0 by convention.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError(
            f"label vectors differ in length: {len(labels_a)} vs {len(labels_b)}"
        )
    n = len(labels_a)
    if n == 0:
        raise ValueError("kappa needs at least one paired label")
    p_o = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    counts_a: dict[Hashable, int] = {}
    counts_b: dict[Hashable, int] = {}
    for a in labels_a:
        counts_a[a] = counts_a.get(a, 0) + 1
    for b in labels_b:
        counts_b[b] = counts_b.get(b, 0) + 1
    p_e = sum(counts_a[k] * counts_b.get(k, 0) for k in counts_a) / (n * n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)

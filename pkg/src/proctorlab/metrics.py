"""Evaluation metrics: equal error rate, DET points, interval matching, MAE.

The EER sweep follows the textbook construction: candidate thresholds are
the midpoints between consecutive distinct scores plus one sentinel past
each end; a score is accepted as genuine when it is on the genuine side of
the threshold. FAR falls and FRR rises as the threshold sweeps, and the
equal error rate is read off at the crossing, linearly interpolating between
the bracketing thresholds when no candidate hits it exactly. Only score
ranks matter, so any strictly increasing transform of all scores leaves the
EER unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import DomainError


class MetricError(DomainError):
    pass


@dataclass(frozen=True)
class ScoreSet:
    genuine: tuple[float, ...]
    impostor: tuple[float, ...]
    higher_is_genuine: bool = True


def _sweep(genuine: np.ndarray, impostor: np.ndarray
           ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thresholds (sentinel, midpoints, sentinel) with FAR/FRR at each."""
    values = np.unique(np.concatenate([genuine, impostor]))
    mids = (values[:-1] + values[1:]) / 2.0
    thresholds = np.concatenate(([values[0] - 1.0], mids, [values[-1] + 1.0]))
    g = np.sort(genuine)
    i = np.sort(impostor)
    # accept as genuine iff score >= threshold
    far = (len(i) - np.searchsorted(i, thresholds, side="left")) / len(i)
    frr = np.searchsorted(g, thresholds, side="left") / len(g)
    return thresholds, far, frr


def compute_eer(scores: ScoreSet) -> tuple[float, float]:
    """Equal error rate and the threshold where FAR meets FRR.

    Returns ``(eer, threshold)``. When no candidate threshold yields
    FAR == FRR exactly, both are linearly interpolated between the two
    bracketing candidates.
    """
    if not scores.genuine or not scores.impostor:
        raise MetricError("EER needs non-empty genuine and impostor score lists")
    sign = 1.0 if scores.higher_is_genuine else -1.0
    g = sign * np.asarray(scores.genuine, dtype=np.float64)
    i = sign * np.asarray(scores.impostor, dtype=np.float64)
    thresholds, far, frr = _sweep(g, i)
    diff = far - frr  # non-increasing from +1 to -1
    k = int(np.argmax(diff <= 0.0))
    if diff[k] == 0.0:
        return float(far[k]), float(sign * thresholds[k])
    lam = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = far[k - 1] + lam * (far[k] - far[k - 1])
    threshold = thresholds[k - 1] + lam * (thresholds[k] - thresholds[k - 1])
    return float(eer), float(sign * threshold)


def det_points(scores: ScoreSet) -> list[tuple[float, float, float]]:
    """(threshold, FAR, FRR) at every sweep candidate, for DET/CSV export."""
    if not scores.genuine or not scores.impostor:
        raise MetricError("DET needs non-empty genuine and impostor score lists")
    sign = 1.0 if scores.higher_is_genuine else -1.0
    g = sign * np.asarray(scores.genuine, dtype=np.float64)
    i = sign * np.asarray(scores.impostor, dtype=np.float64)
    thresholds, far, frr = _sweep(g, i)
    return [(float(sign * t), float(fa), float(fr))
            for t, fa, fr in zip(thresholds, far, frr)]


# ---------------------------------------------------------------------------
# Interval detection metrics
# ---------------------------------------------------------------------------

Interval = tuple[float, float]


def interval_iou(a: Interval, b: Interval) -> float:
    """Intersection over union of two time intervals."""
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class IntervalMatch:
    precision: float
    recall: float
    f1: float
    n_matched: int
    pairs: tuple[tuple[int, int], ...]  # (pred index, truth index)


def interval_f1(pred: Sequence[Interval], truth: Sequence[Interval],
                iou_min: float = 0.3) -> IntervalMatch:
    """Greedy one-to-one interval matching by descending IoU.

    A (pred, truth) pair is matchable iff its IoU reaches ``iou_min``; pairs
    are claimed greedily from the highest IoU down (ties broken by index).
    Empty sides count as perfect for their own rate, and f1 is 0 when both
    precision and recall are 0.
    """
    candidates = []
    for pi, p in enumerate(pred):
        for ti, t in enumerate(truth):
            score = interval_iou(p, t)
            if score >= iou_min:
                candidates.append((-score, pi, ti))
    candidates.sort()
    used_p: set[int] = set()
    used_t: set[int] = set()
    pairs = []
    for _neg, pi, ti in candidates:
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
        pairs.append((pi, ti))
    m = len(pairs)
    precision = m / len(pred) if pred else 1.0
    recall = m / len(truth) if truth else 1.0
    f1 = 0.0 if precision + recall == 0 else \
        2.0 * precision * recall / (precision + recall)
    return IntervalMatch(precision, recall, f1, m, tuple(pairs))


def mae(pred: Sequence[float], truth: Sequence[float]) -> float:
    """Mean absolute difference of two equal-length series."""
    if len(pred) != len(truth):
        raise MetricError(f"length mismatch: {len(pred)} vs {len(truth)}")
    if not len(pred):
        raise MetricError("mae needs at least one pair")
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    return float(np.mean(np.abs(p - t)))


def constant_baseline(train_targets: Sequence[float]) -> Callable[[object], float]:
    """Floor regressor: predicts the training mean for every input."""
    if not len(train_targets):
        raise MetricError("constant baseline needs a non-empty training set")
    mean = float(np.mean(np.asarray(train_targets, dtype=np.float64)))

    def predict(_x: object = None) -> float:
        return mean

    predict.mean = mean  # type: ignore[attr-defined]
    return predict

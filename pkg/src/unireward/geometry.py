"""Box geometry for detection rewards: IoU, matching, and sample-level mAP.

Predictions carry no confidence scores, so list order stands in for rank
everywhere a sweep order is needed, and mAP is computed per sample (then
averaged across samples by the monitoring layer) rather than over a whole
dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .parsing import DetBox


@dataclass
class MatchResult:
    """Greedy one-to-one matching outcome. Each index appears at most once
    across pairs and the unmatched lists; paired IoUs are > 0."""

    pairs: list[tuple[int, int, float]] = field(default_factory=list)  # (gt, pred, iou)
    unmatched_gt: list[int] = field(default_factory=list)
    unmatched_pred: list[int] = field(default_factory=list)


def _box_array(boxes: list[DetBox]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4))
    return np.array([b.bbox for b in boxes], dtype=np.float64)


def iou(a: DetBox, b: DetBox) -> float:
    """Intersection area over union area; 0 when the union is empty."""
    matrix = _kernels.pairwise_iou(_box_array([a]), _box_array([b]))
    return float(matrix[0, 0])


def iou_matrix(preds: list[DetBox], gts: list[DetBox]) -> np.ndarray:
    """(len(preds), len(gts)) IoU matrix."""
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)))
    return _kernels.pairwise_iou(_box_array(preds), _box_array(gts))


def match_detections(preds: list[DetBox], gts: list[DetBox]) -> MatchResult:
    """Greedy matching over label-equal pairs in descending IoU order.

    Labels compare case-insensitively; ties break on (lower gt index,
    lower pred index); zero-IoU pairs never match. Exact optimal
    assignment is out of scope: on curated scenes, where each target has
    at most one heavily overlapping prediction, greedy already attains it.
    """
    matrix = iou_matrix(preds, gts)
    candidates = []
    for g, gt in enumerate(gts):
        for p, pred in enumerate(preds):
            value = matrix[p, g] if matrix.size else 0.0
            if value > 0.0 and pred.label.lower() == gt.label.lower():
                candidates.append((-value, g, p))
    candidates.sort()
    result = MatchResult()
    used_gt: set[int] = set()
    used_pred: set[int] = set()
    for neg, g, p in candidates:
        if g in used_gt or p in used_pred:
            continue
        used_gt.add(g)
        used_pred.add(p)
        result.pairs.append((g, p, -neg))
    result.unmatched_gt = [g for g in range(len(gts)) if g not in used_gt]
    result.unmatched_pred = [p for p in range(len(preds)) if p not in used_pred]
    return result


def thresholded_iou_reward(iou_value: float, epsilon: float) -> float:
    """The overlap value itself when it clears the threshold, else 0."""
    return iou_value if iou_value >= epsilon else 0.0


def detection_accuracy_reward(preds: list[DetBox], gts: list[DetBox], epsilon: float) -> float:
    """Mean over ground-truth boxes of the thresholded matched IoU.

    Empty scenes: no targets and no predictions scores 1.0; predicting
    boxes where none exist scores 0.0, so refusing to predict is never a
    winning strategy when objects are present.
    """
    if not gts:
        return 1.0 if not preds else 0.0
    matched = {g: v for g, _, v in match_detections(preds, gts).pairs}
    total = sum(thresholded_iou_reward(matched.get(g, 0.0), epsilon) for g in range(len(gts)))
    return total / len(gts)


def iou_pass_rates(preds: list[DetBox], gts: list[DetBox], thresholds: list[float]) -> dict[float, float]:
    """Fraction of ground-truth boxes whose matched IoU clears each
    threshold (empty-scene conventions as in detection_accuracy_reward)."""
    if not gts:
        value = 1.0 if not preds else 0.0
        return {t: value for t in thresholds}
    matched = {g: v for g, _, v in match_detections(preds, gts).pairs}
    rates = {}
    for t in thresholds:
        hits = sum(1 for g in range(len(gts)) if matched.get(g, 0.0) >= t)
        rates[t] = hits / len(gts)
    return rates


def _average_precision(preds: list[DetBox], gts: list[DetBox], threshold: float) -> float:
    # Sweep predictions in list order; a prediction is a true positive when
    # it overlaps an unused same-label target at IoU >= threshold (best
    # such target wins). AP integrates the interpolated precision
    # p(r) = max_{r' >= r} precision(r') over recall, all points.
    n_gt = len(gts)
    if not preds:
        return 0.0
    matrix = iou_matrix(preds, gts)
    used = [False] * n_gt
    tp = np.zeros(len(preds))
    for p in range(len(preds)):
        best_g = -1
        best_v = -1.0
        for g in range(n_gt):
            if used[g]:
                continue
            value = matrix[p, g]
            # ties keep the lowest target index
            if value >= threshold and value > best_v:
                best_v = value
                best_g = g
        if best_g >= 0:
            used[best_g] = True
            tp[p] = 1.0
    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, len(preds) + 1)
    recall = cum_tp / n_gt
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre[1:]))


def sample_map(preds: list[DetBox], gts: list[DetBox], iou_thresholds: list[float]) -> float:
    """Sample-level mAP: per class present in the ground truth, AP from
    the list-order sweep; mean over classes, then over thresholds."""
    if not iou_thresholds:
        raise ValueError("iou_thresholds must be non-empty")
    if not gts:
        return 1.0 if not preds else 0.0
    classes = sorted({g.label.lower() for g in gts})
    per_threshold = []
    for threshold in iou_thresholds:
        aps = []
        for cls in classes:
            cls_preds = [p for p in preds if p.label.lower() == cls]
            cls_gts = [g for g in gts if g.label.lower() == cls]
            aps.append(_average_precision(cls_preds, cls_gts, threshold))
        per_threshold.append(sum(aps) / len(aps))
    return sum(per_threshold) / len(per_threshold)

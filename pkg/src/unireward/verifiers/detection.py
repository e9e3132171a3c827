"""Detection/grounding verifier: thresholded IoU under the dynamic
curriculum, format alignment, and sample-level mAP for monitoring."""

from __future__ import annotations

import json
import logging

from ..geometry import detection_accuracy_reward, iou_pass_rates, sample_map
from ..parsing import DetBox, ParseError, extract_answer_block, parse_detections
from ..schedule import ThresholdSchedule, dynamic_threshold
from ..schema import Sample
from .base import RewardBreakdown, VerifyItem, format_reward

logger = logging.getLogger(__name__)

# Monitoring thresholds; override per sample via verifier_parm["iou_thresholds"].
DEFAULT_IOU_THRESHOLDS = (0.50, 0.75, 0.95, 0.99)


def parse_ground_truth(text: str) -> list[DetBox]:
    """Target boxes from the sample's ground_truth field. A malformed
    target is a data bug, not a model failure, so this raises."""
    try:
        return parse_detections(text)
    except ParseError as err:
        raise ValueError(f"invalid detection ground truth: {err.reason}") from err


class DetectionVerifier:
    """Registered under the verifier name "detection"; grounding samples
    route here as well."""

    name = "detection"

    def score(self, item: VerifyItem, training_progress: float) -> RewardBreakdown:
        gts = parse_ground_truth(item.ground_truth)
        schedule = ThresholdSchedule.from_parm(item.verifier_parm)
        thresholds = [float(t) for t in item.verifier_parm.get("iou_thresholds", DEFAULT_IOU_THRESHOLDS)]
        epsilon = dynamic_threshold(training_progress, schedule)
        format_score = format_reward(item.response)

        preds: list[DetBox] | None = None
        block = extract_answer_block(item.response)
        if block is not None:
            try:
                preds = parse_detections(block)
            except ParseError as err:
                logger.debug("unparseable answer block for %s: %s", item.id, err)

        if preds is None:
            # No parseable prediction: accuracy is 0 but format still pays.
            aux = {f"iou@{t:.2f}": 0.0 for t in thresholds}
            aux["sample_map"] = 0.0
            aux["parse_ok"] = 0.0
            return RewardBreakdown.combine(
                0.0, format_score, item.accuracy_ratio, item.format_ratio, aux
            )

        accuracy = detection_accuracy_reward(preds, gts, epsilon)
        aux = {f"iou@{t:.2f}": rate for t, rate in iou_pass_rates(preds, gts, thresholds).items()}
        aux["sample_map"] = sample_map(preds, gts, thresholds)
        aux["parse_ok"] = 1.0
        return RewardBreakdown.combine(
            accuracy, format_score, item.accuracy_ratio, item.format_ratio, aux
        )


def compute_detection_reward(sample: Sample, response: str, progress: float) -> RewardBreakdown:
    """Score one response against a detection-routed sample at the given
    training progress."""
    if sample.reward_model.verifier != DetectionVerifier.name:
        raise ValueError(f"sample routes to {sample.reward_model.verifier!r}, not detection")
    return DetectionVerifier().score(VerifyItem.from_sample(sample, response), progress)


def ground_truth_to_text(boxes: list[DetBox]) -> str:
    """Serialize boxes into the strict-JSON ground-truth form."""
    return json.dumps(
        [{"bbox_2d": list(b.bbox), "label": b.label} for b in boxes], ensure_ascii=False
    )

"""unireward: a sample-routed reward engine for RL post-training.

Every training record names its own verifier and reward weights; a
standalone HTTP service scores batches concurrently; detection rewards
follow a dynamic IoU threshold curriculum; GRPO advantage/objective math,
per-source metric monitoring, a two-stage curation pipeline, and a
desk-scale simulation harness round out the loop.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .grpo import ClipConfig, RewardGroup, TokenBatch, batch_objective, clipped_token_objective, group_advantages
from .parsing import DetBox, ParseError, TagCensus, census_tags, extract_answer_block, extract_boxed, parse_detections, strip_spurious_tokens
from .schedule import BadProgress, ThresholdSchedule, dynamic_threshold
from .schema import BadType, MissingField, Sample, parse_sample, serialize_sample, validate_dataset
from .verifiers import RewardBreakdown, compute_detection_reward, compute_math_reward, format_reward, normalize_answer, verify_answer

__version__ = "0.1.0"

__all__ = [
    "BadProgress",
    "BadType",
    "ClipConfig",
    "DetBox",
    "KERNEL_BACKEND",
    "MissingField",
    "ParseError",
    "RewardBreakdown",
    "RewardGroup",
    "Sample",
    "TagCensus",
    "ThresholdSchedule",
    "TokenBatch",
    "batch_objective",
    "census_tags",
    "clipped_token_objective",
    "compute_detection_reward",
    "compute_math_reward",
    "dynamic_threshold",
    "extract_answer_block",
    "extract_boxed",
    "format_reward",
    "group_advantages",
    "normalize_answer",
    "parse_detections",
    "parse_sample",
    "serialize_sample",
    "strip_spurious_tokens",
    "validate_dataset",
    "verify_answer",
]

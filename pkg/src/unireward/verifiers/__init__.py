from .base import RewardBreakdown, Verifier, VerifyItem, format_reward
from .detection import DetectionVerifier, compute_detection_reward
from .math import MathVerifier, NormalizedAnswer, compute_math_reward, normalize_answer, verify_answer

__all__ = [
    "DetectionVerifier",
    "MathVerifier",
    "NormalizedAnswer",
    "RewardBreakdown",
    "Verifier",
    "VerifyItem",
    "compute_detection_reward",
    "compute_math_reward",
    "format_reward",
    "normalize_answer",
    "verify_answer",
]

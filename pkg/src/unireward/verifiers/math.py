"""Binary-accuracy verifier for answers that fit in ``\\boxed{}``.

Covers math, science, chart, puzzle, counting, and verifiable OCR
samples. The normalizer is a deliberate subset of full symbolic checking:
integers, decimals, simple fractions, percentages, and case-normalized
text. Curation already strips answers with "=", brackets, or more than
20 characters, which keeps this subset adequate.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..parsing import extract_boxed
from ..schema import Sample
from .base import RewardBreakdown, VerifyItem, format_reward

REL_TOL = 1e-6
ABS_TOL = 1e-9

_FRAC_RE = re.compile(r"^([+-]?\d+)\s*/\s*(\d+)$")
_LATEX_FRAC_RE = re.compile(r"^\\frac\{([+-]?\d+)\}\{(\d+)\}$")
_PERCENT_RE = re.compile(r"^([+-]?\d+(?:\.\d+)?)%$")
_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")
_TEXT_WRAPPER_RE = re.compile(r"\\text\{([^{}]*)\}")


@dataclass(frozen=True)
class NormalizedAnswer:
    """Either a numeric value or normalized text, never both."""

    kind: str  # numeric | fraction | percentage | text
    numeric_value: float | None = None
    text_value: str | None = None

    @property
    def is_numeric(self) -> bool:
        return self.kind in ("numeric", "fraction", "percentage")


def normalize_answer(text: str) -> NormalizedAnswer:
    """Canonicalize an answer literal.

    Strips "$", \\text{} wrappers, surrounding whitespace, and trailing
    periods; numbers, a/b fractions, \\frac{a}{b}, and x% percentages
    become numeric values, everything else lowercased text.
    """
    cleaned = text.replace("$", "")
    cleaned = _TEXT_WRAPPER_RE.sub(lambda m: m.group(1), cleaned)
    cleaned = cleaned.strip().rstrip(".").strip()

    if _NUMBER_RE.match(cleaned):
        return NormalizedAnswer(kind="numeric", numeric_value=float(cleaned))
    m = _FRAC_RE.match(cleaned) or _LATEX_FRAC_RE.match(cleaned)
    if m and int(m.group(2)) != 0:
        return NormalizedAnswer(kind="fraction", numeric_value=int(m.group(1)) / int(m.group(2)))
    m = _PERCENT_RE.match(cleaned)
    if m:
        return NormalizedAnswer(kind="percentage", numeric_value=float(m.group(1)) / 100.0)
    return NormalizedAnswer(kind="text", text_value=cleaned.lower())


def verify_answer(pred: str, gold: str) -> bool:
    """True iff the normalized forms match.

    Numeric kinds compare within relative tolerance 1e-6 (absolute 1e-9
    near zero); text compares by exact normalized equality. An empty
    prediction never matches.
    """
    normalized_pred = normalize_answer(pred)
    if normalized_pred.kind == "text" and not normalized_pred.text_value:
        return False
    normalized_gold = normalize_answer(gold)
    if normalized_pred.is_numeric and normalized_gold.is_numeric:
        return math.isclose(
            normalized_pred.numeric_value,
            normalized_gold.numeric_value,
            rel_tol=REL_TOL,
            abs_tol=ABS_TOL,
        )
    if normalized_pred.kind == "text" and normalized_gold.kind == "text":
        return normalized_pred.text_value == normalized_gold.text_value
    return False


class MathVerifier:
    """Registered under the verifier name "math"."""

    name = "math"

    def score(self, item: VerifyItem, training_progress: float) -> RewardBreakdown:
        boxed = extract_boxed(item.response)
        correct = boxed is not None and verify_answer(boxed, item.ground_truth)
        accuracy = 1.0 if correct else 0.0
        format_score = format_reward(item.response) if item.format_ratio > 0 else 0.0
        return RewardBreakdown.combine(
            accuracy,
            format_score,
            item.accuracy_ratio,
            item.format_ratio,
            aux_metrics={"boxed_found": 1.0 if boxed is not None else 0.0},
        )


def compute_math_reward(sample: Sample, response: str) -> RewardBreakdown:
    """Score one response against a math-routed sample."""
    if sample.reward_model.verifier != MathVerifier.name:
        raise ValueError(f"sample routes to {sample.reward_model.verifier!r}, not math")
    return MathVerifier().score(VerifyItem.from_sample(sample, response), 0.0)

"""Shared verifier contract and the reward breakdown value type."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, runtime_checkable

from ..parsing import FORMAT_TAGS, census_tags
from ..schema import Sample


@dataclass
class VerifyItem:
    """One scoring unit on the wire: the response plus the flattened
    per-sample reward configuration."""

    id: str
    data_source: str
    ability: str
    verifier: str
    verifier_parm: dict[str, Any]
    response: str
    answer: str
    ground_truth: str
    accuracy_ratio: float
    format_ratio: float

    @classmethod
    def from_sample(cls, sample: Sample, response: str) -> "VerifyItem":
        rm = sample.reward_model
        return cls(
            id=sample.id,
            data_source=sample.data_source,
            ability=sample.ability,
            verifier=rm.verifier,
            verifier_parm=dict(rm.verifier_parm),
            response=response,
            answer=rm.answer,
            ground_truth=rm.ground_truth,
            accuracy_ratio=rm.accuracy_ratio,
            format_ratio=rm.format_ratio,
        )


@dataclass
class RewardBreakdown:
    """Component rewards plus the weighted combination.

    combined == accuracy_ratio * accuracy + format_ratio * format, exactly
    as computed (both components live in [0, 1]).
    """

    accuracy: float
    format: float
    combined: float
    aux_metrics: dict[str, float] = field(default_factory=dict)

    @classmethod
    def combine(
        cls,
        accuracy: float,
        format_score: float,
        accuracy_ratio: float,
        format_ratio: float,
        aux_metrics: dict[str, float] | None = None,
    ) -> "RewardBreakdown":
        return cls(
            accuracy=accuracy,
            format=format_score,
            combined=accuracy_ratio * accuracy + format_ratio * format_score,
            aux_metrics=aux_metrics or {},
        )


def format_reward(response: str) -> float:
    """0.25 per format tag occurring exactly once in the response, over
    <think>, </think>, <answer>, </answer>."""
    counts = census_tags(response).as_tuple()
    return 0.25 * sum(1 for c in counts if c == 1)


@runtime_checkable
class Verifier(Protocol):
    """Reward computation for one task family. Implementations must be
    stateless/reentrant; the server scores items concurrently."""

    def score(self, item: VerifyItem, training_progress: float) -> RewardBreakdown: ...


__all__ = ["FORMAT_TAGS", "RewardBreakdown", "Verifier", "VerifyItem", "format_reward"]

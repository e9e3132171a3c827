"""Source-level metric monitoring.

Aggregated metrics hide which dataset is destabilizing a multi-source
run, so everything here is keyed by data_source: reward component means,
IoU pass rates, sample-level mAP, response lengths split by correctness,
truncation, and reflection behavior. Streaming aggregates are exact:
snapshots always equal a recomputation over the raw event log.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

from .schema import Sample
from .verifiers.base import RewardBreakdown

# Three canonical reflection cues plus twelve common reflective phrases;
# override via MonitorConfig (the canonical full list is not public).
DEFAULT_REFLECTION_WORDS = (
    "re-check",
    "re-think",
    "verify",
    "wait",
    "let me check",
    "double-check",
    "on second thought",
    "re-examine",
    "re-evaluate",
    "reconsider",
    "to confirm",
    "sanity check",
    "let me verify",
    "correct myself",
    "mistake",
)


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ReflectionConfig:
    words: tuple[str, ...] = DEFAULT_REFLECTION_WORDS
    # a response counts as correct when accuracy > threshold
    correctness_threshold: float = 0.0

    def contains_reflection(self, response: str) -> bool:
        lowered = response.lower()
        return any(w in lowered for w in self.words)


@dataclass(frozen=True)
class MonitorConfig:
    reflection: ReflectionConfig = ReflectionConfig()
    length_unit: str = "chars"  # lengths default to len(response)


@dataclass
class SourceMetrics:
    """Point-in-time aggregate view for one data_source."""

    count: int
    reward_mean: float
    accuracy_mean: float
    format_mean: float
    iou_pass_rate: dict[str, float]
    map_mean: float | None
    length_mean: float
    length_mean_correct: float | None
    length_mean_incorrect: float | None
    truncation_rate: float
    reflection_ratio: float
    reflection_correct_ratio: float | None

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "reward_mean": self.reward_mean,
            "accuracy_mean": self.accuracy_mean,
            "format_mean": self.format_mean,
            "iou_pass_rate": self.iou_pass_rate,
            "map_mean": self.map_mean,
            "length_mean": self.length_mean,
            "length_mean_correct": self.length_mean_correct,
            "length_mean_incorrect": self.length_mean_incorrect,
            "truncation_rate": self.truncation_rate,
            "reflection_ratio": self.reflection_ratio,
            "reflection_correct_ratio": self.reflection_correct_ratio,
        }


class _Accumulator:
    __slots__ = (
        "count",
        "reward_sum",
        "accuracy_sum",
        "format_sum",
        "iou_sums",
        "iou_counts",
        "map_sum",
        "map_count",
        "length_sum",
        "correct_count",
        "correct_length_sum",
        "incorrect_length_sum",
        "truncated",
        "reflections",
        "reflection_correct",
    )

    def __init__(self):
        self.count = 0
        self.reward_sum = 0.0
        self.accuracy_sum = 0.0
        self.format_sum = 0.0
        self.iou_sums: dict[str, float] = {}
        self.iou_counts: dict[str, int] = {}
        self.map_sum = 0.0
        self.map_count = 0
        self.length_sum = 0
        self.correct_count = 0
        self.correct_length_sum = 0
        self.incorrect_length_sum = 0
        self.truncated = 0
        self.reflections = 0
        self.reflection_correct = 0

    def add(self, breakdown: RewardBreakdown, length: int, truncated: bool, reflected: bool, correct: bool):
        self.count += 1
        self.reward_sum += breakdown.combined
        self.accuracy_sum += breakdown.accuracy
        self.format_sum += breakdown.format
        for key, value in breakdown.aux_metrics.items():
            if key.startswith("iou@"):
                threshold = key[len("iou@"):]
                self.iou_sums[threshold] = self.iou_sums.get(threshold, 0.0) + value
                self.iou_counts[threshold] = self.iou_counts.get(threshold, 0) + 1
            elif key == "sample_map":
                self.map_sum += value
                self.map_count += 1
        self.length_sum += length
        if correct:
            self.correct_count += 1
            self.correct_length_sum += length
        else:
            self.incorrect_length_sum += length
        if truncated:
            self.truncated += 1
        if reflected:
            self.reflections += 1
            if correct:
                self.reflection_correct += 1

    def view(self) -> SourceMetrics:
        n = self.count
        incorrect = n - self.correct_count
        return SourceMetrics(
            count=n,
            reward_mean=self.reward_sum / n,
            accuracy_mean=self.accuracy_sum / n,
            format_mean=self.format_sum / n,
            iou_pass_rate={
                t: self.iou_sums[t] / self.iou_counts[t] for t in sorted(self.iou_sums)
            },
            map_mean=self.map_sum / self.map_count if self.map_count else None,
            length_mean=self.length_sum / n,
            length_mean_correct=(
                self.correct_length_sum / self.correct_count if self.correct_count else None
            ),
            length_mean_incorrect=(
                self.incorrect_length_sum / incorrect if incorrect else None
            ),
            truncation_rate=self.truncated / n,
            reflection_ratio=self.reflections / n,
            reflection_correct_ratio=(
                self.reflection_correct / self.reflections if self.reflections else None
            ),
        )


class MetricsMonitor:
    """Streaming per-source aggregates plus a per-step log for export.

    record_batch is safe to call from many workers; snapshot() is
    linearizable with respect to completed record_batch calls.
    """

    def __init__(self, config: MonitorConfig | None = None):
        self.config = config or MonitorConfig()
        self._lock = threading.Lock()
        self._running: dict[str, _Accumulator] = {}
        self._step = 0
        self._step_rows: list[dict] = []

    def record_batch(
        self,
        samples: list[Sample],
        responses: list[str],
        breakdowns: list[RewardBreakdown],
        max_len: int,
        lengths: list[int] | None = None,
    ) -> None:
        """Fold one batch into the aggregates.

        A response is truncated iff its length equals max_len; correct iff
        its accuracy component clears the configured threshold. Lengths
        default to character counts; pass `lengths` to record token
        counts instead.
        """
        if len(samples) != len(responses) or len(samples) != len(breakdowns):
            raise LengthMismatch("samples, responses, and breakdowns must be parallel")
        if lengths is not None and len(lengths) != len(samples):
            raise LengthMismatch("lengths must parallel samples")
        if not samples:
            return
        reflection = self.config.reflection
        with self._lock:
            self._step += 1
            batch_local: dict[str, _Accumulator] = {}
            for i, (sample, response, breakdown) in enumerate(
                zip(samples, responses, breakdowns)
            ):
                length = lengths[i] if lengths is not None else len(response)
                truncated = length == max_len
                reflected = reflection.contains_reflection(response)
                correct = breakdown.accuracy > reflection.correctness_threshold
                source = sample.data_source
                for bucket in (self._running, batch_local):
                    bucket.setdefault(source, _Accumulator()).add(
                        breakdown, length, truncated, reflected, correct
                    )
            for source in sorted(batch_local):
                row = {"step": self._step, "data_source": source}
                row.update(batch_local[source].view().to_dict())
                self._step_rows.append(row)

    def snapshot(self) -> dict[str, SourceMetrics]:
        with self._lock:
            return {source: acc.view() for source, acc in self._running.items()}

    def export_jsonl(self, path) -> None:
        """Header line (unit + reflection words), then one row per
        (step, data_source) with the per-batch metrics in a fixed key
        order."""
        with self._lock:
            rows = list(self._step_rows)
        header = {
            "kind": "header",
            "length_unit": self.config.length_unit,
            "reflection_words": list(self.config.reflection.words),
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")

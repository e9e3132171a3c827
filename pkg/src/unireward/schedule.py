"""Piecewise-constant IoU threshold curriculum.

A strict overlap threshold gives an unambiguous localization target but
starves early training of signal; the default schedule relaxes it at the
start and tightens it in stages: 0.85 for the first 10% of training,
0.95 from 10% to 25%, then 0.99 for the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass


class BadProgress(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdSchedule:
    """Ordered stages of (progress_upper_bound, epsilon).

    Stages are half-open on the left: progress p uses the first stage with
    p < bound, and the final stage (bound 1.0) also covers p == 1.0, so
    exactly 0.10 already uses the second stage's epsilon.
    """

    stages: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.stages:
            raise ValueError("schedule needs at least one stage")
        previous = 0.0
        previous_eps = 0.0
        for bound, eps in self.stages:
            if not previous < bound <= 1.0:
                raise ValueError("stage bounds must be strictly increasing within (0, 1]")
            if not 0.0 < eps <= 1.0:
                raise ValueError("epsilon must lie in (0, 1]")
            if eps < previous_eps:
                raise ValueError("epsilons must be non-decreasing")
            previous = bound
            previous_eps = eps
        if self.stages[-1][0] != 1.0:
            raise ValueError("final stage bound must be 1.0")

    @classmethod
    def default(cls) -> "ThresholdSchedule":
        return cls(stages=((0.10, 0.85), (0.25, 0.95), (1.0, 0.99)))

    @classmethod
    def fixed(cls, epsilon: float) -> "ThresholdSchedule":
        return cls(stages=((1.0, epsilon),))

    @classmethod
    def from_parm(cls, parm: dict) -> "ThresholdSchedule":
        """Build from per-sample parameters (parallel scalar lists under
        `schedule_bounds` / `schedule_epsilons`); default when absent."""
        bounds = parm.get("schedule_bounds")
        epsilons = parm.get("schedule_epsilons")
        if bounds is None and epsilons is None:
            return cls.default()
        if bounds is None or epsilons is None or len(bounds) != len(epsilons):
            raise ValueError("schedule_bounds and schedule_epsilons must be parallel lists")
        return cls(stages=tuple(zip((float(b) for b in bounds), (float(e) for e in epsilons))))


def dynamic_threshold(progress: float, schedule: ThresholdSchedule | None = None) -> float:
    """Threshold in force at a training progress in [0, 1]."""
    if not 0.0 <= progress <= 1.0:
        raise BadProgress(f"training progress {progress!r} outside [0, 1]")
    schedule = schedule or ThresholdSchedule.default()
    for bound, eps in schedule.stages:
        if progress < bound:
            return eps
    return schedule.stages[-1][1]

"""Group-normalized advantages and the token-level clipped objective.

Rewards are normalized within each group of G rollouts for the same
prompt (population statistics, no Bessel correction), and the policy
objective is the token-level mean of the clipped surrogate

    min(r * A, clip(r, 1 - eps_low, 1 + eps_high) * A)

summed over every token of every response and divided by the total token
count. The clip range is asymmetric (eps_high > eps_low) to let
low-probability tokens gain mass faster, and there is no reference-model
KL term anywhere; the API has no hook for one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

DEFAULT_GROUP_SIZE = 8


@dataclass(frozen=True)
class ClipConfig:
    eps_low: float = 0.2
    eps_high: float = 0.28
    std_floor: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.eps_low <= self.eps_high < 1.0:
            raise ValueError("need 0 < eps_low <= eps_high < 1")

    @property
    def lo(self) -> float:
        return 1.0 - self.eps_low

    @property
    def hi(self) -> float:
        return 1.0 + self.eps_high


@dataclass
class RewardGroup:
    """Scalar rewards of one rollout group."""

    rewards: list[float]

    def __post_init__(self):
        if len(self.rewards) < 2:
            raise ValueError("a reward group needs at least 2 rollouts")

    @property
    def size(self) -> int:
        return len(self.rewards)


@dataclass
class TokenBatch:
    """Per-response token importance ratios with the group advantage
    broadcast over each response's tokens. Ratios are current/behavior
    probability ratios supplied by the caller; no policy lives here."""

    ratios: list[np.ndarray]
    advantages: list[float]

    def __post_init__(self):
        if len(self.ratios) != len(self.advantages):
            raise ValueError("ratios and advantages must be parallel")
        for r in self.ratios:
            if len(r) < 1:
                raise ValueError("each response needs at least one token")
            if np.any(np.asarray(r) <= 0):
                raise ValueError("importance ratios must be positive")

    def flattened(self) -> tuple[np.ndarray, np.ndarray]:
        ratios = np.concatenate([np.asarray(r, dtype=np.float64) for r in self.ratios])
        advantages = np.concatenate(
            [np.full(len(r), a, dtype=np.float64) for r, a in zip(self.ratios, self.advantages)]
        )
        return ratios, advantages


def group_advantages(group: RewardGroup | list[float] | np.ndarray, std_floor: float = 1e-8) -> np.ndarray:
    """A_i = (R_i - mean) / population std; all zeros when the group is
    (near-)degenerate, since an all-equal group carries no signal."""
    rewards = group.rewards if isinstance(group, RewardGroup) else group
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.ndim != 1 or rewards.shape[0] < 2:
        raise ValueError("a reward group needs at least 2 rollouts")
    return _kernels.group_normalize(rewards, std_floor)


def clipped_token_objective(ratio: float, advantage: float, cfg: ClipConfig = ClipConfig()) -> float:
    """Inner min term for one token."""
    clipped = min(max(ratio, cfg.lo), cfg.hi)
    return min(ratio * advantage, clipped * advantage)


def batch_objective(batch: TokenBatch, cfg: ClipConfig = ClipConfig()) -> float:
    """Token-level mean of the clipped objective over all responses.

    Normalization is a single flat mean over the pooled tokens, not a
    mean of per-response means, so long responses weigh proportionally.
    """
    ratios, advantages = batch.flattened()
    total = _kernels.clipped_objective_sum(ratios, advantages, cfg.lo, cfg.hi)
    return total / len(ratios)


def objective_grad_wrt_ratio(ratio: float, advantage: float, cfg: ClipConfig = ClipConfig()) -> float:
    """Subgradient of the clipped objective in the ratio.

    The unclipped branch contributes the advantage; an active clip
    contributes 0. At the kink the two branches agree in value and the
    unclipped side is reported.
    """
    clipped = min(max(ratio, cfg.lo), cfg.hi)
    if ratio * advantage <= clipped * advantage:
        return advantage
    return 0.0

"""Numeric kernels behind the reward and objective math.

The hot inner loops (pairwise IoU matrices, group reward normalization,
clipped-objective sums over token batches) exist in two flavors: a numba
``@njit`` loop-nest version and a vectorized pure-numpy fallback. The JIT
path is used when numba imports cleanly and ``UNIREWARD_DISABLE_NUMBA``
is unset (or "0"); ``benchmarks/bench_kernels.py`` times both.
"""

from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "UNIREWARD_DISABLE_NUMBA"


# --- pure-numpy implementations -------------------------------------------

def group_normalize_np(rewards: np.ndarray, std_floor: float) -> np.ndarray:
    """(r - mean) / population-std per group; all zeros when std < floor."""
    rewards = np.asarray(rewards, dtype=np.float64)
    mean = rewards.mean()
    std = rewards.std()
    if std < std_floor:
        return np.zeros_like(rewards)
    return (rewards - mean) / std


def clipped_objective_sum_np(
    ratios: np.ndarray, advantages: np.ndarray, lo: float, hi: float
) -> float:
    """Sum over tokens of min(r*A, clip(r, lo, hi)*A)."""
    ratios = np.asarray(ratios, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    clipped = np.clip(ratios, lo, hi)
    return float(np.minimum(ratios * advantages, clipped * advantages).sum())


def pairwise_iou_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix for corner-form boxes, shape (n, 4) x (m, 4) -> (n, m)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = np.clip(a[:, 2] - a[:, 0], 0.0, None) * np.clip(a[:, 3] - a[:, 1], 0.0, None)
    area_b = np.clip(b[:, 2] - b[:, 0], 0.0, None) * np.clip(b[:, 3] - b[:, 1], 0.0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


# --- loop-nest bodies compiled by numba ------------------------------------

def _group_normalize_loops(rewards, std_floor):
    n = rewards.shape[0]
    mean = 0.0
    for i in range(n):
        mean += rewards[i]
    mean /= n
    var = 0.0
    for i in range(n):
        d = rewards[i] - mean
        var += d * d
    var /= n
    std = np.sqrt(var)
    out = np.zeros(n)
    if std < std_floor:
        return out
    for i in range(n):
        out[i] = (rewards[i] - mean) / std
    return out


def _clipped_objective_sum_loops(ratios, advantages, lo, hi):
    s = 0.0
    for i in range(ratios.shape[0]):
        r = ratios[i]
        a = advantages[i]
        c = r
        if c < lo:
            c = lo
        elif c > hi:
            c = hi
        u = r * a
        v = c * a
        s += u if u < v else v
    return s


def _pairwise_iou_loops(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        aw = a[i, 2] - a[i, 0]
        ah = a[i, 3] - a[i, 1]
        area_a = (aw if aw > 0.0 else 0.0) * (ah if ah > 0.0 else 0.0)
        for j in range(m):
            bw = b[j, 2] - b[j, 0]
            bh = b[j, 3] - b[j, 1]
            area_b = (bw if bw > 0.0 else 0.0) * (bh if bh > 0.0 else 0.0)
            iw = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
            ih = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
            inter = (iw if iw > 0.0 else 0.0) * (ih if ih > 0.0 else 0.0)
            union = area_a + area_b - inter
            out[i, j] = inter / union if union > 0.0 else 0.0
    return out


def _jit_enabled() -> bool:
    flag = os.environ.get(DISABLE_ENV, "").strip()
    if flag not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _jit_enabled()

if NUMBA_ENABLED:
    from numba import njit

    group_normalize_jit = njit(cache=True)(_group_normalize_loops)
    clipped_objective_sum_jit = njit(cache=True)(_clipped_objective_sum_loops)
    pairwise_iou_jit = njit(cache=True)(_pairwise_iou_loops)

    BACKEND = "numba"

    def group_normalize(rewards, std_floor):
        return group_normalize_jit(np.ascontiguousarray(rewards, dtype=np.float64), std_floor)

    def clipped_objective_sum(ratios, advantages, lo, hi):
        return float(
            clipped_objective_sum_jit(
                np.ascontiguousarray(ratios, dtype=np.float64),
                np.ascontiguousarray(advantages, dtype=np.float64),
                lo,
                hi,
            )
        )

    def pairwise_iou(a, b):
        return pairwise_iou_jit(
            np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4),
            np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4),
        )

else:
    BACKEND = "numpy"
    group_normalize = group_normalize_np
    clipped_objective_sum = clipped_objective_sum_np
    pairwise_iou = pairwise_iou_np


def warmup() -> None:
    """Trigger JIT compilation so first real calls are not charged for it."""
    r = np.array([1.0, 0.0, 0.5])
    group_normalize(r, 1e-8)
    clipped_objective_sum(r, r, 0.8, 1.28)
    boxes = np.array([[0.0, 0.0, 1.0, 1.0], [0.5, 0.5, 1.5, 1.5]])
    pairwise_iou(boxes, boxes)

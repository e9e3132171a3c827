"""Timing comparison of the JIT kernels against the pure-numpy fallbacks.

Run: python benchmarks/bench_kernels.py
The numpy path alone can be forced with UNIREWARD_DISABLE_NUMBA=1, but
this script times both paths side by side when numba is importable.
"""

from __future__ import annotations

import time

import numpy as np

from unireward import _kernels


def bench(fn, *args, repeat=5, number=20):
    fn(*args)  # warm any compile cache
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - started) / number)
    return best


def main() -> None:
    rng = np.random.default_rng(0)

    # token batch: 1024 responses x 512 tokens, group advantages, IoU grid
    ratios = np.exp(rng.normal(0, 0.3, size=1024 * 512))
    advantages = np.repeat(rng.normal(size=1024), 512)
    rewards = rng.normal(size=8)
    boxes_a = np.sort(rng.uniform(0, 1, size=(256, 2, 2)), axis=1).reshape(256, 4)
    boxes_b = np.sort(rng.uniform(0, 1, size=(256, 2, 2)), axis=1).reshape(256, 4)

    cases = [
        ("clipped_objective_sum (512k tokens)", (ratios, advantages, 0.8, 1.28),
         _kernels.clipped_objective_sum_np,
         _kernels.clipped_objective_sum_jit if _kernels.NUMBA_ENABLED else None),
        ("group_normalize (G=8)", (rewards, 1e-8),
         _kernels.group_normalize_np,
         _kernels.group_normalize_jit if _kernels.NUMBA_ENABLED else None),
        ("pairwise_iou (256x256)", (boxes_a, boxes_b),
         _kernels.pairwise_iou_np,
         _kernels.pairwise_iou_jit if _kernels.NUMBA_ENABLED else None),
    ]

    print(f"active backend: {_kernels.BACKEND}")
    print(f"{'kernel':<38} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, args, np_fn, jit_fn in cases:
        np_time = bench(np_fn, *args)
        if jit_fn is None:
            print(f"{name:<38} {np_time * 1e3:>10.3f}ms {'n/a':>12} {'n/a':>9}")
            continue
        jit_time = bench(jit_fn, *args)
        print(
            f"{name:<38} {np_time * 1e3:>10.3f}ms {jit_time * 1e3:>10.3f}ms "
            f"{np_time / jit_time:>8.2f}x"
        )


if __name__ == "__main__":
    main()

"""Shared synthetic generators for the test suite."""

from __future__ import annotations

import numpy as np

from overscale_lab.vote_curve import BudgetAccuracyCurve


def make_theorem1_curve_dataset(seed: int, p4: float, n_questions: int = 40,
                                n_max: int = 128) -> list[BudgetAccuracyCurve]:
    """Curve-level dataset with a controlled type-4 share.

    Type-4 curves rise strictly to a shared peak budget then stay flat;
    type-3 curves drop slightly then flatten early; types 1, 2, 5 are
    constant.  This satisfies every premise of the overscaling bound, so the
    bound must hold on the result.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    n4_peak = int(rng.integers(64, 121))
    n3_flat = max(2, n4_peak // 8)
    n_t4 = max(1, round(p4 * n_questions))
    rest = n_questions - n_t4
    n_t3 = max(1, rest // 3)
    n_t5 = rest // 4
    n_t1 = (rest - n_t3 - n_t5 + 1) // 2
    n_t2 = rest - n_t3 - n_t5 - n_t1
    curves: list[BudgetAccuracyCurve] = []

    def curve(vals):
        curves.append(BudgetAccuracyCurve(tuple(vals), n_max))

    for _ in range(n_t1):
        curve([1.0] * n_max)
    for _ in range(n_t2):
        curve([0.0] * n_max)
    for _ in range(n_t3):
        base = rng.uniform(0.30, 0.60)
        drop = rng.uniform(0.01, 0.02)
        vals = [base - drop * min(1.0, (n - 1) / (n3_flat - 1))
                for n in range(1, n_max + 1)]
        curve(vals)
    for _ in range(n_t5):
        curve([float(rng.uniform(0.2, 0.6))] * n_max)
    for _ in range(n_t4):
        lo = rng.uniform(0.10, 0.30)
        hi = lo + rng.uniform(0.45, 0.60)
        gamma = rng.uniform(0.6, 1.8)
        vals = [lo + (hi - lo) * (min(n, n4_peak) - 1) ** gamma
                / (n4_peak - 1) ** gamma
                for n in range(1, n_max + 1)]
        curve(vals)
    return curves

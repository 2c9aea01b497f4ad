"""Approximate-monotonicity test and the five-type partition of curves.

A curve is approximately monotone in a direction when at least `threshold` of
the step-s differences point that way (zero differences count for both
directions, so flat curves pass both).  The partition is decided by a fixed
precedence so every curve lands in exactly one type.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .trace_model import canonical_json
from .vote_curve import BudgetAccuracyCurve


class SampleType(enum.Enum):
    T1_CONST1 = 1
    T2_CONST0 = 2
    T3_APPROX_DECREASING = 3
    T4_APPROX_INCREASING = 4
    T5_NONMONOTONIC = 5


@dataclass(frozen=True)
class MonotonicityParams:
    """Step, pass threshold, and constancy tolerance for classification.

    step=None means the per-curve default floor(sqrt(n_max)).
    """

    step: int | None = None
    threshold: float = 0.80
    const_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.step is not None and self.step < 1:
            raise ValueError(f"step must be positive, got {self.step}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.const_tol < 0.0:
            raise ValueError(f"const_tol must be >= 0, got {self.const_tol}")

    def resolve_step(self, n_max: int) -> int:
        return self.step if self.step is not None else int(math.isqrt(n_max))


def approx_monotone(curve: BudgetAccuracyCurve, direction: int,
                    params: MonotonicityParams = MonotonicityParams()) -> bool:
    """True when the share of step differences with direction*diff >= 0 passes."""
    if direction not in (1, -1):
        raise ValueError(f"direction must be +1 or -1, got {direction}")
    s = params.resolve_step(curve.n_max)
    if s >= curve.n_max:
        raise ValueError(f"step {s} must be smaller than n_max {curve.n_max}")
    hits = 0
    total = curve.n_max - s
    for i in range(1, total + 1):
        diff = curve.value_at(i + s) - curve.value_at(i)
        if direction * diff >= 0.0:
            hits += 1
    return hits / total >= params.threshold


def classify(curve: BudgetAccuracyCurve,
             params: MonotonicityParams = MonotonicityParams()) -> SampleType:
    """Assign a curve to one of the five types.

    Precedence: constant-1, constant-0, then the directional tests.  A curve
    passing both directions (flat-dominant) is disambiguated by the sign of
    its net change; length-1 curves carry no direction and fall to type 5.
    """
    values = curve.values
    tol = params.const_tol
    if all(v >= 1.0 - tol for v in values):
        return SampleType.T1_CONST1
    if all(v <= tol for v in values):
        return SampleType.T2_CONST0
    if curve.n_max == 1:
        return SampleType.T5_NONMONOTONIC
    inc = approx_monotone(curve, +1, params)
    dec = approx_monotone(curve, -1, params)
    if inc and not dec:
        return SampleType.T4_APPROX_INCREASING
    if dec and not inc:
        return SampleType.T3_APPROX_DECREASING
    if inc and dec:
        net = values[-1] - values[0]
        if net > 0.0:
            return SampleType.T4_APPROX_INCREASING
        if net < 0.0:
            return SampleType.T3_APPROX_DECREASING
    return SampleType.T5_NONMONOTONIC


@dataclass(frozen=True)
class Partition:
    """Proportions and memberships of the five types over a curve set."""

    proportions: tuple[float, float, float, float, float]
    members: dict[int, list[int]]          # type id -> indices into the input
    types: tuple[SampleType, ...]

    def proportion(self, type_id: int) -> float:
        return self.proportions[type_id - 1]


def partition(curves: Sequence[BudgetAccuracyCurve],
              params: MonotonicityParams = MonotonicityParams()) -> Partition:
    """Classify every curve; memberships are disjoint and exhaustive."""
    if len(curves) == 0:
        raise ValueError("partition requires at least one curve")
    types = tuple(classify(c, params) for c in curves)
    members: dict[int, list[int]] = {i: [] for i in range(1, 6)}
    for idx, t in enumerate(types):
        members[t.value].append(idx)
    total = len(curves)
    proportions = tuple(len(members[i]) / total for i in range(1, 6))
    return Partition(proportions=proportions, members=members, types=types)


def partition_report_json(part: Partition,
                          question_ids: Sequence[str]) -> str:
    obj = {
        "p": list(part.proportions),
        "members": {str(i): [question_ids[j] for j in part.members[i]]
                    for i in range(1, 6)},
    }
    return canonical_json(obj)


def partition_report_csv(part: Partition, question_ids: Sequence[str]) -> str:
    lines = ["question_id,type"]
    for idx, t in enumerate(part.types):
        lines.append(f"{question_ids[idx]},{t.value}")
    return "\n".join(lines) + "\n"

"""Sample/system-optimal budgets, the overscaling index, and the Theorem-1 check.

The Theorem-1 verifier evaluates class-level gains at the integer budget where
the type-4 class mean curve first peaks, while the ratio bound itself is
formed from real-valued class means of per-sample optima; `assumptions_met`
gates every structural premise the proof needs, so on gated datasets the bound
must hold up to float tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .taxonomy import MonotonicityParams, Partition, partition
from .vote_curve import BudgetAccuracyCurve

DEFAULT_EPS_ACC = 1e-9


@dataclass(frozen=True)
class OptimalN:
    """Smallest budget attaining the curve maximum within eps_acc."""

    n_star: int
    max_acc: float


@dataclass(frozen=True)
class OverscalingReport:
    n_star_dataset: float
    n_system: int
    index: float
    per_type_n_star: tuple[float | None, float | None, float | None,
                           float | None, float | None]
    proportions: tuple[float, float, float, float, float]


@dataclass(frozen=True)
class Theorem1Inputs:
    kappa: float
    delta: float                 # may be math.inf
    p4: float
    n_star_d4: float


@dataclass(frozen=True)
class Theorem1Report:
    inputs: Theorem1Inputs
    n4_budget: int               # integer budget used for all gain evaluations
    phi: float
    m_d: float
    holds: bool
    assumptions_met: bool
    assumption_flags: dict


def sample_optimal_n(curve: BudgetAccuracyCurve,
                     eps_acc: float = DEFAULT_EPS_ACC) -> OptimalN:
    """Smallest N with A(N) >= max A - eps_acc."""
    max_acc = max(curve.values)
    for n in range(1, curve.n_max + 1):
        if curve.value_at(n) >= max_acc - eps_acc:
            return OptimalN(n_star=n, max_acc=max_acc)
    raise AssertionError("unreachable: the maximum itself qualifies")


def mean_curve(curves: Sequence[BudgetAccuracyCurve]) -> BudgetAccuracyCurve:
    if len(curves) == 0:
        raise ValueError("mean_curve of an empty curve set")
    n_max = curves[0].n_max
    if any(c.n_max != n_max for c in curves):
        raise ValueError("curves must share one n_max")
    total = len(curves)
    values = tuple(
        sum(c.values[i] for c in curves) / total for i in range(n_max)
    )
    return BudgetAccuracyCurve(values, n_max, {"method": "MEAN"})


def system_optimal_n(curves: Sequence[BudgetAccuracyCurve],
                     eps_acc: float = DEFAULT_EPS_ACC) -> int:
    """Smallest budget maximizing the dataset-mean curve within eps_acc."""
    return sample_optimal_n(mean_curve(curves), eps_acc).n_star


def gain(curve: BudgetAccuracyCurve, n1: int, n2: int) -> float:
    """A(n2) - A(n1); antisymmetric in its budget arguments."""
    return curve.value_at(n2) - curve.value_at(n1)


def _class_curves(curves: Sequence[BudgetAccuracyCurve],
                  part: Partition) -> dict[int, list[BudgetAccuracyCurve]]:
    return {i: [curves[j] for j in part.members[i]] for i in range(1, 6)}


def overscaling_index(curves: Sequence[BudgetAccuracyCurve],
                      eps_acc: float = DEFAULT_EPS_ACC,
                      params: MonotonicityParams = MonotonicityParams(),
                      part: Partition | None = None) -> OverscalingReport:
    """Dataset overscaling index with per-type mean optima."""
    if len(curves) == 0:
        raise ValueError("overscaling_index of an empty curve set")
    if part is None:
        part = partition(curves, params)
    optima = [sample_optimal_n(c, eps_acc).n_star for c in curves]
    n_star_dataset = float(sum(optima)) / len(optima)
    n_system = system_optimal_n(curves, eps_acc)
    per_type: list[float | None] = []
    for i in range(1, 6):
        idx = part.members[i]
        if idx:
            per_type.append(float(sum(optima[j] for j in idx)) / len(idx))
        else:
            per_type.append(None)
    return OverscalingReport(
        n_star_dataset=n_star_dataset,
        n_system=n_system,
        index=n_star_dataset / n_system,
        per_type_n_star=tuple(per_type),
        proportions=part.proportions,
    )


def theorem1_check(curves: Sequence[BudgetAccuracyCurve],
                   eps_acc: float = DEFAULT_EPS_ACC,
                   params: MonotonicityParams = MonotonicityParams(),
                   part: Partition | None = None) -> Theorem1Report:
    """Numerical check of the overscaling upper bound on one curve set.

    Gains are evaluated on empirical class mean curves at the integer budget
    where the type-4 mean curve first peaks; empty classes contribute a unit
    optimum and zero gains.  `assumptions_met` additionally requires the
    type-4 mean of per-sample optima not to exceed that budget, which the
    bound's denominator needs.
    """
    if len(curves) == 0:
        raise ValueError("theorem1_check of an empty curve set")
    if part is None:
        part = partition(curves, params)
    by_class = _class_curves(curves, part)
    report = overscaling_index(curves, eps_acc, params, part)
    class_means = {i: (mean_curve(cs) if cs else None)
                   for i, cs in by_class.items()}
    p = part.proportions
    p4 = p[3]

    t4_mean = class_means[4]
    n4_budget = sample_optimal_n(t4_mean, eps_acc).n_star if t4_mean else 1
    per_type = report.per_type_n_star
    n3 = per_type[2] if per_type[2] is not None else 1.0
    n5 = per_type[4] if per_type[4] is not None else 1.0
    r4 = per_type[3] if per_type[3] is not None else 1.0
    kappa = n3 + n5 - 1.0

    def class_gain(i: int, n1: int, n2: int) -> float:
        cm = class_means[i]
        return gain(cm, n1, n2) if cm is not None else 0.0

    # delta: infimum over 1 <= N < n4_budget of gain ratios; the 0/0 point at
    # N = n4_budget is vacuous and excluded
    delta = math.inf
    for n in range(1, n4_budget):
        num = class_gain(4, n, n4_budget)
        den = -class_gain(3, n, n4_budget)
        ratio = math.inf if den <= 0.0 else num / den
        if ratio < delta:
            delta = ratio

    indicator = p4 > 0.0 and (math.isinf(delta) or p4 * delta > 1.0 - p4)
    phi = (kappa + p4 * (r4 - kappa)) / (1.0 + (r4 - 1.0) * (1.0 if indicator else 0.0))

    flags = {
        "zero_gain_t1": all(abs(class_gain(1, n, n4_budget)) <= eps_acc
                            for n in range(1, n4_budget + 1)),
        "zero_gain_t2": all(abs(class_gain(2, n, n4_budget)) <= eps_acc
                            for n in range(1, n4_budget + 1)),
        "zero_gain_t5": all(abs(class_gain(5, n, n4_budget)) <= eps_acc
                            for n in range(1, n4_budget + 1)),
        "t4_gain_positive": all(class_gain(4, n, n4_budget) > 0.0
                                for n in range(1, n4_budget)),
        "t3_gain_nonpositive": all(class_gain(3, n, n4_budget) <= 0.0
                                   for n in range(1, n4_budget + 1)),
        "t4_mean_within_budget": r4 <= n4_budget + eps_acc,
    }
    assumptions_met = all(flags.values())
    m_d = report.index
    return Theorem1Report(
        inputs=Theorem1Inputs(kappa=kappa, delta=delta, p4=p4, n_star_d4=r4),
        n4_budget=n4_budget,
        phi=phi,
        m_d=m_d,
        holds=m_d <= phi + eps_acc,
        assumptions_met=assumptions_met,
        assumption_flags=flags,
    )


def type_gain_table(curves: Sequence[BudgetAccuracyCurve],
                    eps_acc: float = DEFAULT_EPS_ACC,
                    params: MonotonicityParams = MonotonicityParams(),
                    part: Partition | None = None) -> list[dict]:
    """Per-type mean optima and gains over [1, N4*] and [N4*, N_max]."""
    if len(curves) == 0:
        raise ValueError("type_gain_table of an empty curve set")
    if part is None:
        part = partition(curves, params)
    report = overscaling_index(curves, eps_acc, params, part)
    by_class = _class_curves(curves, part)
    class_means = {i: (mean_curve(cs) if cs else None)
                   for i, cs in by_class.items()}
    t4_mean = class_means[4]
    n4_budget = sample_optimal_n(t4_mean, eps_acc).n_star if t4_mean else 1
    n_max = curves[0].n_max
    rows = []
    for i in range(1, 6):
        cm = class_means[i]
        rows.append({
            "type": i,
            "n_star": report.per_type_n_star[i - 1],
            "gain_1_to_n4star": gain(cm, 1, n4_budget) if cm else None,
            "gain_n4star_to_nmax": gain(cm, n4_budget, n_max) if cm else None,
        })
    return rows


def oracle_vs_system_values(curves: Sequence[BudgetAccuracyCurve],
                            eps_acc: float = DEFAULT_EPS_ACC) -> tuple[float, float]:
    """(mean_x A_x(N*_x), mean_x A_x(N_D)); the first never loses, since
    each question evaluates at its own argmax."""
    n_d = system_optimal_n(curves, eps_acc)
    at_star = [c.value_at(sample_optimal_n(c, eps_acc).n_star) for c in curves]
    at_system = [c.value_at(n_d) for c in curves]
    return (sum(at_star) / len(curves), sum(at_system) / len(curves))

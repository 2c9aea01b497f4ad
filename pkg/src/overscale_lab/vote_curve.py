"""Majority voting and budget-accuracy curves.

The per-question curve value at budget n is the expected majority-vote credit
of a uniform n-subset drawn without replacement from the recorded draws.  Two
routes compute it: a subsampling estimator (full enumeration when the subset
count is small, seeded Monte Carlo otherwise) and an exact combinatorial
oracle over per-answer draw counts.  Both routes reduce to integer tallies of
credit classes and share one rational-arithmetic finalization, so wherever
both enumerate fully they agree bit for bit.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from types import ModuleType
from typing import Sequence

import numpy as np

from . import backend as _backend
from ._rng import derive_key
from .trace_model import QuestionTrace, TraceDataset, answer_counts

ENUM_CAP = 200_000
MAX_EXACT_ANSWERS = 12
_MAX_EXACT_STATES = 2_000_000


class TieRule(enum.Enum):
    FRACTIONAL = "fractional"
    FIRST_SEEN = "first-seen"


@dataclass(frozen=True)
class SubsampleParams:
    """Parameters of the subsampling estimator."""

    tau: int = 100_000
    seed: int = 0
    tie_rule: TieRule = TieRule.FRACTIONAL

    def __post_init__(self) -> None:
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")


@dataclass(frozen=True)
class BudgetAccuracyCurve:
    """Accuracy as a function of budget, values[i] holding A(i + 1)."""

    values: tuple[float, ...]
    n_max: int
    estimator_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != self.n_max:
            raise ValueError(
                f"curve has {len(self.values)} values for n_max={self.n_max}"
            )
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("curve values must lie in [0, 1]")

    def value_at(self, n: int) -> float:
        if not 1 <= n <= self.n_max:
            raise ValueError(f"budget {n} outside [1, {self.n_max}]")
        return self.values[n - 1]


def _leader(answers: Sequence[int]) -> tuple[int, Counter]:
    """Leader by count, ties broken by earliest first occurrence."""
    counts = Counter(answers)
    first_pos: dict[int, int] = {}
    for i, a in enumerate(answers):
        if a not in first_pos:
            first_pos[a] = i
    best = max(counts, key=lambda a: (counts[a], -first_pos[a]))
    return best, counts


def majority_vote(answers: Sequence[int], gold: int | None,
                  tie: TieRule = TieRule.FRACTIONAL) -> float:
    """Credit of a majority vote over `answers` against `gold`.

    FRACTIONAL gives 1/t when gold ties among t leaders; FIRST_SEEN gives the
    whole credit to the leader whose first occurrence is earliest.
    """
    if len(answers) == 0:
        raise ValueError("majority_vote over an empty answer list")
    if gold is None:
        return 0.0
    winner, counts = _leader(answers)
    if tie is TieRule.FIRST_SEEN:
        return 1.0 if winner == gold else 0.0
    vmax = counts[winner]
    if counts.get(gold, 0) != vmax:
        return 0.0
    ties = sum(1 for c in counts.values() if c == vmax)
    return float(Fraction(1, ties))


def _tally_to_float(tally: Sequence[int], total: int) -> float:
    """Shared exact finalization: sum of class tallies weighted 1/class."""
    acc = Fraction(0)
    for cls in range(1, len(tally)):
        t = int(tally[cls])
        if t:
            acc += Fraction(t, cls)
    return float(acc / total)


@lru_cache(maxsize=1024)
def _exact_tallies_all_n(counts: tuple[int, ...], gold: int) -> tuple[dict, ...]:
    """Exact per-budget credit-class subset counts for one count vector.

    Folds the non-gold answers into states (subset size, max count, number of
    answers at the max) with exact integer weights, then attaches the gold
    count.  tallies[n][cls] = number of n-subsets whose vote credit is 1/cls.
    """
    m = len(counts)
    if m > MAX_EXACT_ANSWERS:
        raise ValueError(
            f"exact path supports at most {MAX_EXACT_ANSWERS} distinct answers, "
            f"got {m}"
        )
    n_total = sum(counts)
    cg = counts[gold]
    states: dict[tuple[int, int, int], int] = {(0, 0, 0): 1}
    for j, c in enumerate(counts):
        if j == gold:
            continue
        binom_row = [math.comb(c, k) for k in range(c + 1)]
        new: dict[tuple[int, int, int], int] = {}
        for (s, v, w), ways in states.items():
            for k in range(c + 1):
                if k > v:
                    key = (s + k, k, 1)
                elif k == v and k > 0:
                    key = (s + k, v, w + 1)
                else:
                    key = (s + k, v, w)
                prev = new.get(key)
                add = ways * binom_row[k]
                new[key] = add if prev is None else prev + add
        states = new
        if len(states) > _MAX_EXACT_STATES:
            raise ValueError(
                "exact subset accuracy infeasible for this count vector "
                f"(state space exceeds {_MAX_EXACT_STATES})"
            )
    tallies: tuple[dict, ...] = tuple({} for _ in range(n_total + 1))
    binom_gold = [math.comb(cg, t) for t in range(cg + 1)]
    for (s, v, w), ways in states.items():
        for t in range(cg + 1):
            if t > v:
                cls = 1
            elif t == v and t > 0:
                cls = 1 + w
            else:
                continue
            bucket = tallies[s + t]
            weight = ways * binom_gold[t]
            bucket[cls] = bucket.get(cls, 0) + weight
    return tallies


def exact_subset_accuracy(counts: Sequence[int], gold_index: int | None, n: int,
                          tie: TieRule = TieRule.FRACTIONAL) -> float:
    """Exact expected vote credit of a uniform n-subset of a draw pool.

    Only FRACTIONAL ties are supported: the first-seen outcome depends on the
    positions of the draws, which a count vector does not carry.
    """
    if tie is not TieRule.FRACTIONAL:
        raise ValueError(
            "exact_subset_accuracy requires TieRule.FRACTIONAL; first-seen "
            "outcomes depend on draw positions, not just counts"
        )
    counts = tuple(int(c) for c in counts)
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    n_total = sum(counts)
    if n_total < 1:
        raise ValueError("counts must sum to at least 1")
    if not 1 <= n <= n_total:
        raise ValueError(f"budget {n} outside [1, {n_total}]")
    if gold_index is None:
        return 0.0
    if not 0 <= gold_index < len(counts):
        raise ValueError(f"gold index {gold_index} outside count vector")
    tallies = _exact_tallies_all_n(counts, gold_index)
    tally = [0] * (len(counts) + 1)
    for cls, ways in tallies[n].items():
        tally[cls] = ways
    return _tally_to_float(tally, math.comb(n_total, n))


def _trace_arrays(trace: QuestionTrace) -> tuple[np.ndarray, int, int]:
    answers = np.asarray(trace.draws, dtype=np.int64)
    gold = -1 if trace.gold is None else int(trace.gold)
    return answers, gold, trace.num_answers


def subsample_accuracy(trace: QuestionTrace, n: int, params: SubsampleParams,
                       kernels: ModuleType | None = None) -> float:
    """Subsampling estimate of the vote accuracy at budget n.

    Enumerates every subset when C(n_max, n) fits under both tau and the
    enumeration cap; otherwise averages min(tau, C) Monte-Carlo replicates
    drawn from a counter-based stream keyed by (seed, question_id, n).
    """
    if not 1 <= n <= trace.n_max:
        raise ValueError(f"budget {n} outside [1, {trace.n_max}]")
    if trace.gold is None:
        return 0.0
    answers, gold, m = _trace_arrays(trace)
    kern = kernels if kernels is not None else _backend.get_backend()
    first_seen = params.tie_rule is TieRule.FIRST_SEEN
    n_subsets = math.comb(trace.n_max, n)
    if n_subsets <= min(params.tau, ENUM_CAP):
        tally = kern.enum_tally(answers, gold, n, m, first_seen)
        return _tally_to_float(tally, n_subsets)
    reps = min(params.tau, n_subsets)
    key = np.uint64(derive_key(params.seed, trace.question_id, n))
    tally = kern.mc_tally(answers, gold, n, m, key, reps, first_seen)
    return _tally_to_float(tally, reps)


def budget_accuracy_curve(trace: QuestionTrace,
                          params: SubsampleParams = SubsampleParams(),
                          exact: bool = False,
                          kernels: ModuleType | None = None) -> BudgetAccuracyCurve:
    """Full curve A(1..n_max) for one trace.

    With exact=True every value comes from the combinatorial oracle (requires
    FRACTIONAL ties); otherwise each budget uses the subsampling estimator.
    """
    n_max = trace.n_max
    meta = {
        "method": "EXACT" if exact else "SUBSAMPLE",
        "m_draws": params.tau,
        "seed": params.seed,
    }
    if trace.gold is None:
        return BudgetAccuracyCurve((0.0,) * n_max, n_max, meta)
    if exact:
        if params.tie_rule is not TieRule.FRACTIONAL:
            raise ValueError("exact curves require TieRule.FRACTIONAL")
        counts = tuple(answer_counts(trace))
        tallies = _exact_tallies_all_n(counts, trace.gold)
        m = len(counts)
        values = []
        for n in range(1, n_max + 1):
            tally = [0] * (m + 1)
            for cls, ways in tallies[n].items():
                tally[cls] = ways
            values.append(_tally_to_float(tally, math.comb(n_max, n)))
        return BudgetAccuracyCurve(tuple(values), n_max, meta)
    kern = kernels if kernels is not None else _backend.get_backend()
    values = tuple(
        subsample_accuracy(trace, n, params, kernels=kern)
        for n in range(1, n_max + 1)
    )
    return BudgetAccuracyCurve(values, n_max, meta)


def dataset_curves(dataset: TraceDataset,
                   params: SubsampleParams = SubsampleParams(),
                   exact: bool = False,
                   threads: int | None = None) -> list[BudgetAccuracyCurve]:
    """Curves for every trace, parallel over questions, order preserved.

    Per-question sampling streams are self-contained, so the result is
    independent of the worker count.
    """
    kern = _backend.get_backend()
    workers = threads if threads is not None else _backend.thread_budget()
    if workers <= 1 or len(dataset.traces) <= 1:
        return [budget_accuracy_curve(t, params, exact, kernels=kern)
                for t in dataset.traces]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(budget_accuracy_curve, t, params, exact, kern)
                   for t in dataset.traces]
        return [f.result() for f in futures]


def curves_to_csv(dataset: TraceDataset,
                  curves: Sequence[BudgetAccuracyCurve]) -> str:
    """CSV export, one row per (question, budget)."""
    lines = ["question_id,N,accuracy"]
    for trace, curve in zip(dataset.traces, curves):
        for n in range(1, curve.n_max + 1):
            lines.append(f"{trace.question_id},{n},{curve.value_at(n)!r}")
    return "\n".join(lines) + "\n"

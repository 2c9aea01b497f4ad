"""Deterministic replay of adaptive-budget policies over recorded traces.

Policies never sample: draw i of a question is its i-th decode, so every
policy sees identical randomness and runs are exactly reproducible.
samples_used counts draws consumed; rounds_used counts sequential decode
batches, the latency driver when batches run fully parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .overscale_metrics import DEFAULT_EPS_ACC, sample_optimal_n
from .trace_model import QuestionTrace, TraceDataset
from .vote_curve import BudgetAccuracyCurve, TieRule, _leader, majority_vote


@dataclass(frozen=True)
class PolicyOutcome:
    question_id: str
    final_answer: int | None
    credit: float
    samples_used: int
    rounds_used: int

    def __post_init__(self) -> None:
        if self.samples_used < 1 or self.rounds_used < 1:
            raise ValueError("samples_used and rounds_used must be >= 1")
        if self.rounds_used > self.samples_used:
            raise ValueError("rounds_used cannot exceed samples_used")


@dataclass(frozen=True)
class CostReport:
    mean_samples: float
    mean_rounds: float
    c_mem_proxy: float    # mean samples vs baseline: concurrent paths drive KV
    c_time_proxy: float   # mean rounds vs baseline: each round is one batch
    accuracy: float


def betainc_half(a: int, b: int) -> float:
    """Regularized incomplete beta I_{1/2}(a, b) for integer a, b >= 1.

    Uses the binomial-tail identity I_p(a, b) = P[Bin(a+b-1, p) >= a],
    evaluated in exact rational arithmetic.
    """
    if a < 1 or b < 1:
        raise ValueError("betainc_half requires integer parameters >= 1")
    n = a + b - 1
    total = sum(math.comb(n, k) for k in range(a, n + 1))
    return float(Fraction(total, 2 ** n))


def _vote_outcome(question: QuestionTrace, prefix: Sequence[int],
                  samples: int, rounds: int, tie: TieRule,
                  final: int | None = None) -> PolicyOutcome:
    """Outcome scored against the answer the policy actually emits.

    When `final` is given the policy's own rule already picked one answer and
    the credit is simply whether it is the gold one; otherwise the consumed
    prefix is majority-voted under the tie rule.
    """
    if final is None:
        final, _ = _leader(prefix)
        credit = majority_vote(prefix, question.gold, tie)
    else:
        credit = float(question.gold is not None and final == question.gold)
    return PolicyOutcome(
        question_id=question.question_id,
        final_answer=final,
        credit=credit,
        samples_used=samples,
        rounds_used=rounds,
    )


def run_std_pt(dataset: TraceDataset, n: int,
               tie: TieRule = TieRule.FIRST_SEEN) -> list[PolicyOutcome]:
    """Standard parallel thinking: one batch of n draws for every question."""
    if not 1 <= n <= dataset.n_max:
        raise ValueError(f"budget {n} outside [1, {dataset.n_max}]")
    return [
        _vote_outcome(q, q.draws[:n], samples=n, rounds=1, tie=tie)
        for q in dataset.traces
    ]


def run_oracle(dataset: TraceDataset, curves: Sequence[BudgetAccuracyCurve],
               eps_acc: float = DEFAULT_EPS_ACC,
               tie: TieRule = TieRule.FIRST_SEEN) -> list[PolicyOutcome]:
    """Each question gets its own curve-optimal budget in a single batch."""
    if len(curves) != len(dataset.traces):
        raise ValueError("one curve per trace required")
    out = []
    for q, curve in zip(dataset.traces, curves):
        n_star = sample_optimal_n(curve, eps_acc).n_star
        out.append(_vote_outcome(q, q.draws[:n_star], samples=n_star,
                                 rounds=1, tie=tie))
    return out


def run_ac(dataset: TraceDataset, max_budget: int = 40,
           conf_threshold: float = 0.95,
           tie: TieRule = TieRule.FIRST_SEEN) -> list[PolicyOutcome]:
    """Adaptive consistency: one draw at a time until the posterior that the
    leader beats the runner-up clears the threshold."""
    if max_budget < 1:
        raise ValueError("max_budget must be >= 1")
    cap = min(max_budget, dataset.n_max)
    out = []
    for q in dataset.traces:
        used = cap
        for i in range(1, cap + 1):
            prefix = q.draws[:i]
            _, counts = _leader(prefix)
            ordered = sorted(counts.values(), reverse=True)
            v1 = ordered[0]
            v2 = ordered[1] if len(ordered) > 1 else 0
            if betainc_half(v2 + 1, v1 + 1) >= conf_threshold:
                used = i
                break
        prefix = q.draws[:used]
        out.append(_vote_outcome(q, prefix, samples=used, rounds=used, tie=tie))
    return out


def run_esc(dataset: TraceDataset, window: int = 5, max_budget: int = 40,
            tie: TieRule = TieRule.FIRST_SEEN) -> list[PolicyOutcome]:
    """Early stopping by unanimous windows of `window` parallel draws."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if max_budget < window:
        raise ValueError("max_budget must be >= window")
    cap = min(max_budget, dataset.n_max)
    out = []
    for q in dataset.traces:
        pos = 0
        rounds = 0
        final = None
        while pos < cap:
            take = min(window, cap - pos)
            block = q.draws[pos:pos + take]
            pos += take
            rounds += 1
            if len(set(block)) == 1:
                final = block[0]
                break
        out.append(_vote_outcome(q, q.draws[:pos], samples=pos, rounds=rounds,
                                 tie=tie, final=final))
    return out


def _difficulty(q: QuestionTrace) -> float:
    if q.difficulty is not None:
        return q.difficulty
    # disagreement proxy: one minus the modal answer's share of the pool
    _, counts = _leader(q.draws)
    return 1.0 - max(counts.values()) / q.n_max


def run_dsc(dataset: TraceDataset, window: int = 4, k_consecutive: int = 32,
            max_budget: int = 40,
            tie: TieRule = TieRule.FIRST_SEEN) -> list[PolicyOutcome]:
    """Difficulty-ordered scan with doubling blocks for hard questions.

    Stage 1 ranks questions hardest-first (difficulty field, else the
    disagreement proxy).  Stage 2 draws one window per question until
    k_consecutive unanimous windows occur.  Questions past that point get one
    draw; scanned questions keep doubling their block size until the newest
    block is unanimous or the budget cap is hit.
    """
    if window < 1 or k_consecutive < 1:
        raise ValueError("window and k_consecutive must be >= 1")
    cap = min(max_budget, dataset.n_max)
    order = sorted(range(len(dataset.traces)),
                   key=lambda i: (-_difficulty(dataset.traces[i]), i))
    outcomes: dict[int, PolicyOutcome] = {}
    consec = 0
    stop_rank = len(order)    # first rank NOT scanned
    for rank, qi in enumerate(order):
        q = dataset.traces[qi]
        take = min(window, cap)
        block = q.draws[:take]
        if len(set(block)) == 1:
            consec += 1
        else:
            consec = 0
        if consec >= k_consecutive:
            stop_rank = rank + 1
            break
    for rank, qi in enumerate(order):
        q = dataset.traces[qi]
        if rank >= stop_rank:
            outcomes[qi] = _vote_outcome(q, q.draws[:1], samples=1, rounds=1,
                                         tie=tie)
            continue
        consumed = min(window, cap)
        rounds = 1
        block = q.draws[:consumed]
        size = window
        while len(set(block)) > 1 and consumed < cap:
            size *= 2
            take = min(size, cap - consumed)
            block = q.draws[consumed:consumed + take]
            consumed += take
            rounds += 1
        outcomes[qi] = _vote_outcome(q, q.draws[:consumed], samples=consumed,
                                     rounds=rounds, tie=tie)
    return [outcomes[i] for i in range(len(dataset.traces))]


def run_t2(dataset: TraceDataset, estimates: Sequence[int],
           tie: TieRule = TieRule.FIRST_SEEN) -> list[PolicyOutcome]:
    """Budget known before decoding: one batch of the estimated size."""
    if len(estimates) != len(dataset.traces):
        raise ValueError("one estimate per trace required")
    out = []
    for q, n_hat in zip(dataset.traces, estimates):
        n_hat = int(n_hat)
        if not 1 <= n_hat <= dataset.n_max:
            raise ValueError(
                f"estimate {n_hat} for {q.question_id!r} outside "
                f"[1, {dataset.n_max}]"
            )
        out.append(_vote_outcome(q, q.draws[:n_hat], samples=n_hat, rounds=1,
                                 tie=tie))
    return out


def _mean(values: Sequence[float]) -> float:
    return float(sum(values)) / len(values)


def cost_report(outcomes: Sequence[PolicyOutcome],
                baseline: Sequence[PolicyOutcome]) -> CostReport:
    """Sample- and round-count ratios against a baseline run."""
    if len(outcomes) == 0:
        raise ValueError("cost_report of an empty outcome list")
    if ({o.question_id for o in outcomes}
            != {o.question_id for o in baseline}):
        raise ValueError("outcome and baseline question sets differ")
    mean_samples = _mean([o.samples_used for o in outcomes])
    mean_rounds = _mean([o.rounds_used for o in outcomes])
    base_samples = _mean([o.samples_used for o in baseline])
    base_rounds = _mean([o.rounds_used for o in baseline])
    return CostReport(
        mean_samples=mean_samples,
        mean_rounds=mean_rounds,
        c_mem_proxy=mean_samples / base_samples,
        c_time_proxy=mean_rounds / base_rounds,
        accuracy=_mean([o.credit for o in outcomes]),
    )


def outcomes_to_csv(outcomes: Sequence[PolicyOutcome]) -> str:
    lines = ["question_id,final_answer,credit,samples_used,rounds_used"]
    for o in outcomes:
        final = "" if o.final_answer is None else str(o.final_answer)
        lines.append(f"{o.question_id},{final},{o.credit!r},"
                     f"{o.samples_used},{o.rounds_used}")
    return "\n".join(lines) + "\n"

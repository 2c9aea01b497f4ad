"""Categorical answer-distribution model and synthetic trace generation.

A question is modelled as a categorical distribution over canonical answers;
the sign of the margin (gold probability minus the strongest competitor's)
decides where majority voting converges, and the top-two gap drives
finite-budget wobble.  The exact vote-accuracy routine is a dynamic program
over multinomial counts; a sequence-enumeration brute force is kept as an
independent oracle for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import counter_uniform, derive_key, splitmix64
from .trace_model import QuestionTrace, SamplingConfig, TraceDataset
from .vote_curve import TieRule

_DP_MAX_ANSWERS = 8
_DP_MAX_BUDGET = 64
_BRUTE_MAX_SEQUENCES = 5_000_000


@dataclass(frozen=True)
class CategoricalAnswerModel:
    """Per-question answer distribution with the gold answer's index."""

    p: tuple[float, ...]
    gold_index: int

    def __post_init__(self) -> None:
        p = tuple(float(x) for x in self.p)
        object.__setattr__(self, "p", p)
        if len(p) < 1:
            raise ValueError("probability vector must be non-empty")
        if any(x < 0.0 for x in p):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(p)!r}, not 1")
        if not 0 <= self.gold_index < len(p):
            raise ValueError(f"gold index {self.gold_index} outside [0, {len(p)})")

    @property
    def num_answers(self) -> int:
        return len(self.p)


@dataclass(frozen=True)
class MarginStats:
    margin: float   # gold probability minus strongest competitor
    gap: float      # top-1 probability minus top-2 probability


def margin_stats(model: CategoricalAnswerModel) -> MarginStats:
    """Margin and top-two gap; a single-answer model counts as margin 1."""
    p = model.p
    if len(p) == 1:
        return MarginStats(margin=1.0, gap=1.0)
    competitors = [x for j, x in enumerate(p) if j != model.gold_index]
    margin = p[model.gold_index] - max(competitors)
    ordered = sorted(p, reverse=True)
    return MarginStats(margin=margin, gap=ordered[0] - ordered[1])


def sample_trace(model: CategoricalAnswerModel, n_max: int, seed: int,
                 question_id: str = "q0") -> QuestionTrace:
    """Draw n_max i.i.d. answers and relabel them densely by first appearance.

    The gold id follows the relabeling; if the gold answer never occurs the
    trace carries gold=None.  Raw model indices are kept as answer labels.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    cum = np.cumsum(model.p)
    cum[-1] = 1.0
    key = derive_key(seed, question_id, n_max)
    raw: list[int] = []
    for i in range(n_max):
        u = counter_uniform(key, i)
        raw.append(int(np.searchsorted(cum, u, side="right")))
    dense: dict[int, int] = {}
    draws = []
    for r in raw:
        if r not in dense:
            dense[r] = len(dense)
        draws.append(dense[r])
    gold = dense.get(model.gold_index)
    labels = {d: f"a{r}" for r, d in dense.items()}
    return QuestionTrace(
        question_id=question_id,
        gold=gold,
        draws=tuple(draws),
        answer_labels=labels,
    )


def _credit_weight(t: int, w: int) -> float:
    # gold count t against w other answers tied at the same count
    if w == 0:
        return 1.0
    return 1.0 / (1 + w)


def exact_mv_accuracy(model: CategoricalAnswerModel, n: int,
                      tie: TieRule = TieRule.FRACTIONAL) -> float:
    """Exact expected majority-vote credit of n i.i.d. draws.

    Under i.i.d. sampling every ordering of a count vector is equally likely,
    so first-seen tie-breaking has the same expectation as fractional credit;
    both tie rules return the same value here.
    """
    del tie
    m = model.num_answers
    if n < 1:
        raise ValueError(f"budget must be >= 1, got {n}")
    if m > _DP_MAX_ANSWERS or n > _DP_MAX_BUDGET:
        raise ValueError(
            f"exact path supports m <= {_DP_MAX_ANSWERS} and n <= "
            f"{_DP_MAX_BUDGET}, got m={m}, n={n}"
        )
    pg = model.p[model.gold_index]
    others = [x for j, x in enumerate(model.p) if j != model.gold_index]
    if not others:
        return 1.0
    total = 0.0
    factorials = [math.factorial(k) for k in range(n + 1)]
    for t in range(1, n + 1):
        rest = n - t
        # fold the other answers: state[s, w] = sum over assignments with all
        # counts <= t, total s, and w answers exactly at t, of prod q^k / k!
        state = np.zeros((rest + 1, m), dtype=np.float64)
        state[0, 0] = 1.0
        for q in others:
            kmax = min(t, rest)
            weights = np.array([q ** k / factorials[k] for k in range(kmax + 1)])
            new = np.zeros_like(state)
            for w in range(m - 1):
                col = state[:, w]
                if not col.any():
                    continue
                below = np.convolve(col, weights[:min(t, kmax + 1)])[: rest + 1]
                new[:, w] += below
                if t <= kmax:
                    shifted = col[: rest + 1 - t] * weights[t]
                    new[t:, w + 1] += shifted
            state = new
        gold_factor = pg ** t / factorials[t]
        contrib = 0.0
        for w in range(m):
            if state[rest, w]:
                contrib += state[rest, w] * _credit_weight(t, w)
        total += factorials[n] * gold_factor * contrib
    return min(total, 1.0)


def brute_force_mv_accuracy(model: CategoricalAnswerModel, n: int,
                            tie: TieRule = TieRule.FRACTIONAL) -> float:
    """Independent oracle: enumerate all m**n outcome sequences."""
    m = model.num_answers
    if m ** n > _BRUTE_MAX_SEQUENCES:
        raise ValueError(f"{m}**{n} sequences exceed the brute-force cap")
    from .vote_curve import majority_vote

    total = 0.0
    seq = [0] * n
    while True:
        prob = 1.0
        for a in seq:
            prob *= model.p[a]
        if prob > 0.0:
            total += prob * majority_vote(seq, model.gold_index, tie)
        i = n - 1
        while i >= 0 and seq[i] == m - 1:
            seq[i] = 0
            i -= 1
        if i < 0:
            return total
        seq[i] += 1


def mc_mv_accuracy(model: CategoricalAnswerModel, n: int, trials: int,
                   seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo vote accuracy with its standard error, for large budgets."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    counts = rng.multinomial(n, model.p, size=trials)
    vmax = counts.max(axis=1)
    ties = (counts == vmax[:, None]).sum(axis=1)
    gold_at_max = counts[:, model.gold_index] == vmax
    credit = np.where(gold_at_max, 1.0 / ties, 0.0)
    return float(credit.mean()), float(credit.std(ddof=1) / math.sqrt(trials))


def union_bound_lower(model: CategoricalAnswerModel, n: int) -> float:
    """Margin-based lower bound 1 - (m-1) exp(-n margin^2 / 2), floored at 0."""
    if n < 1:
        raise ValueError(f"budget must be >= 1, got {n}")
    stats = margin_stats(model)
    if stats.margin <= 0.0:
        raise ValueError("bound requires a strictly positive margin")
    m = model.num_answers
    return max(0.0, 1.0 - (m - 1) * math.exp(-n * stats.margin ** 2 / 2.0))


# --- synthetic dataset construction ----------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """How many questions of each intended type to generate, and with what
    margin / gap ranges."""

    counts: dict[int, int]
    n_max: int = 128
    seed: int = 0
    margin_range_t3: tuple[float, float] = (-0.30, -0.15)
    margin_range_t4: tuple[float, float] = (0.15, 0.30)
    gap_range_t5: tuple[float, float] = (0.0, 0.02)

    def __post_init__(self) -> None:
        if not self.counts or any(t not in (1, 2, 3, 4, 5) for t in self.counts):
            raise ValueError("counts must map type ids 1..5 to question counts")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("per-type counts must be non-negative")
        if sum(self.counts.values()) < 1:
            raise ValueError("need at least one question")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        lo3, hi3 = self.margin_range_t3
        if not (lo3 <= hi3 < 0.0):
            raise ValueError("type-3 margin range must be negative")
        lo4, hi4 = self.margin_range_t4
        if not (0.0 < lo4 <= hi4):
            raise ValueError("type-4 margin range must be positive")
        lo5, hi5 = self.gap_range_t5
        if not (0.0 <= lo5 <= hi5):
            raise ValueError("type-5 gap range must be non-negative")


@dataclass(frozen=True)
class SynthResult:
    dataset: TraceDataset
    intended: dict[str, int]
    models: dict[str, CategoricalAnswerModel] = field(repr=False, default_factory=dict)


def _model_for_type(type_id: int, spec: SynthSpec, u1: float, u2: float,
                    u3: float) -> CategoricalAnswerModel:
    if type_id == 1:
        return CategoricalAnswerModel(p=(1.0,), gold_index=0)
    if type_id == 2:
        w = 0.55 + 0.35 * u1
        return CategoricalAnswerModel(p=(0.0, w, 1.0 - w), gold_index=0)
    filler = 0.01 + 0.04 * u2
    if type_id in (3, 4):
        lo, hi = spec.margin_range_t3 if type_id == 3 else spec.margin_range_t4
        delta = lo + (hi - lo) * u1
        p_gold = (1.0 + delta - filler) / 2.0
        p_comp = p_gold - delta
        return CategoricalAnswerModel(p=(p_gold, p_comp, filler), gold_index=0)
    lo, hi = spec.gap_range_t5
    gamma = lo + (hi - lo) * u1
    p1 = 0.36 + 0.10 * u2
    p2 = p1 - gamma
    rest = 1.0 - p1 - p2
    gold_index = 0 if u3 < 0.5 else 1
    return CategoricalAnswerModel(p=(p1, p2, rest), gold_index=gold_index)


def synth_dataset(spec: SynthSpec) -> SynthResult:
    """Sampled traces with known intended types, for recovery experiments."""
    traces: list[QuestionTrace] = []
    intended: dict[str, int] = {}
    models: dict[str, CategoricalAnswerModel] = {}
    idx = 0
    for type_id in sorted(spec.counts):
        for _ in range(spec.counts[type_id]):
            qid = f"synth-{idx:05d}"
            pkey = splitmix64((spec.seed & ((1 << 64) - 1)) ^ (idx * 3 + 11))
            u1 = counter_uniform(pkey, 0)
            u2 = counter_uniform(pkey, 1)
            u3 = counter_uniform(pkey, 2)
            model = _model_for_type(type_id, spec, u1, u2, u3)
            traces.append(sample_trace(model, spec.n_max, spec.seed, qid))
            intended[qid] = type_id
            models[qid] = model
            idx += 1
    cfg = SamplingConfig(model_name="categorical-sim", seed=spec.seed)
    dataset = TraceDataset(traces=tuple(traces), sampling_config=cfg,
                           n_max=spec.n_max)
    return SynthResult(dataset=dataset, intended=intended, models=models)

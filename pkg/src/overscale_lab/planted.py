"""Planted-feature benchmark for desk-scale estimator experiments.

A scalar latent decides how many wrong draws a question's reference pool
contains; the optimal budget of the resulting two-answer trace is the label,
and every layer observes a noisy affine image of the latent, with per-layer
noise chosen so layers differ in informativeness.  The paired traces are
arranged so the prefix vote flips to gold at roughly half the optimal budget,
giving the replayed policies a real accuracy/cost trade-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .overscale_metrics import sample_optimal_n
from .trace_model import LayerFeatureSet, QuestionTrace, SamplingConfig, TraceDataset
from .vote_curve import BudgetAccuracyCurve, SubsampleParams, budget_accuracy_curve

_LATENT_DIM = 4


@dataclass
class PlantedBenchmark:
    train: list[LayerFeatureSet]
    val: list[LayerFeatureSet]
    test: list[LayerFeatureSet]
    test_dataset: TraceDataset
    test_curves: list[BudgetAccuracyCurve]
    test_optima: list[int]
    n_max: int


@lru_cache(maxsize=256)
def _curve_for_wrong_count(wrong: int, n_max: int) -> BudgetAccuracyCurve:
    trace = _trace_for_wrong_count("probe", wrong, n_max)
    return budget_accuracy_curve(trace, SubsampleParams(), exact=True)


def _trace_for_wrong_count(qid: str, wrong: int, n_max: int) -> QuestionTrace:
    gold_count = n_max - wrong
    early = wrong // 2
    draws: list[int] = []
    for _ in range(early):
        draws.extend((1, 0))           # wrong first, so early prefixes miss
    draws.extend([0] * (gold_count - early))
    draws.extend([1] * (wrong - early))
    return QuestionTrace(question_id=qid, gold=0, draws=tuple(draws))


def _planted_score(z: np.ndarray, direction: np.ndarray) -> np.ndarray:
    raw = z @ direction + 0.35 * z[:, 0] * z[:, 1] - 0.8
    return 1.0 / (1.0 + np.exp(-raw))


def make_planted_benchmark(seed: int = 0, n_train: int = 5000, n_val: int = 5000,
                           n_test: int = 2000, dim: int = 64, n_layers: int = 6,
                           n_max: int = 128) -> PlantedBenchmark:
    """Deterministic benchmark splits plus the paired test trace set."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    direction = rng.normal(size=_LATENT_DIM)
    direction /= np.linalg.norm(direction)
    mixers = [rng.normal(size=(dim, _LATENT_DIM)) / np.sqrt(_LATENT_DIM)
              for _ in range(n_layers)]
    offsets = [rng.normal(size=dim) * 0.1 for _ in range(n_layers)]
    noise_scales = np.geomspace(0.15, 2.0, n_layers)
    noise_scales = noise_scales[rng.permutation(n_layers)]

    max_wrong = n_max // 2 - 1

    def build_split(count: int, prefix: str) -> tuple[list[LayerFeatureSet], list[int]]:
        z = rng.normal(size=(count, _LATENT_DIM))
        score = _planted_score(z, direction)
        wrongs = np.minimum((score * (max_wrong + 1)).astype(int), max_wrong)
        features = []
        for i in range(count):
            wrong = int(wrongs[i])
            curve = _curve_for_wrong_count(wrong, n_max)
            n_star = sample_optimal_n(curve, eps_acc=0.0).n_star
            label = n_star / n_max
            vectors = []
            for layer in range(n_layers):
                clean = mixers[layer] @ z[i] + offsets[layer]
                noisy = clean + noise_scales[layer] * rng.normal(size=dim)
                vectors.append(tuple(float(v) for v in noisy))
            features.append(LayerFeatureSet(
                question_id=f"{prefix}-{i:05d}",
                layer_vectors=tuple(vectors),
                label=label,
            ))
        return features, [int(w) for w in wrongs]

    train, _ = build_split(n_train, "train")
    val, _ = build_split(n_val, "val")
    test, test_wrongs = build_split(n_test, "test")

    traces = []
    curves = []
    optima = []
    for f, wrong in zip(test, test_wrongs):
        trace = _trace_for_wrong_count(f.question_id, wrong, n_max)
        curve = _curve_for_wrong_count(wrong, n_max)
        n_star = sample_optimal_n(curve, eps_acc=0.0).n_star
        flip = 2 * (wrong // 2) + 1     # first budget whose prefix vote is gold
        assert n_star >= flip, "curve optimum must not undercut the vote flip"
        traces.append(trace)
        curves.append(curve)
        optima.append(n_star)
    dataset = TraceDataset(
        traces=tuple(traces),
        sampling_config=SamplingConfig(model_name="planted-benchmark", seed=seed),
        n_max=n_max,
    )
    return PlantedBenchmark(
        train=train,
        val=val,
        test=test,
        test_dataset=dataset,
        test_curves=curves,
        test_optima=optima,
        n_max=n_max,
    )

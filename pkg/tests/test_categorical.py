from __future__ import annotations

import math

import pytest

from overscale_lab.categorical_sim import (CategoricalAnswerModel, SynthSpec,
                                           brute_force_mv_accuracy,
                                           exact_mv_accuracy, margin_stats,
                                           mc_mv_accuracy, sample_trace,
                                           synth_dataset, union_bound_lower)
from overscale_lab.taxonomy import SampleType, partition
from overscale_lab.vote_curve import SubsampleParams, budget_accuracy_curve, \
    dataset_curves


def symmetric_model(m, delta):
    pg = (1 + delta * (m - 1)) / m
    po = (1 - pg) / (m - 1)
    return CategoricalAnswerModel((pg,) + (po,) * (m - 1), 0)


def test_margin_stats_examples():
    s = margin_stats(CategoricalAnswerModel((0.6, 0.4), 0))
    assert s.margin == pytest.approx(0.2) and s.gap == pytest.approx(0.2)
    s = margin_stats(CategoricalAnswerModel((0.4, 0.6), 0))
    assert s.margin == pytest.approx(-0.2) and s.gap == pytest.approx(0.2)
    s = margin_stats(CategoricalAnswerModel((0.5, 0.5), 0))
    assert s.margin == 0.0 and s.gap == 0.0
    s = margin_stats(CategoricalAnswerModel((1.0,), 0))
    assert s.margin == 1.0 and s.gap == 1.0


def test_model_validation():
    with pytest.raises(ValueError):
        CategoricalAnswerModel((0.6, 0.3), 0)
    with pytest.raises(ValueError):
        CategoricalAnswerModel((0.6, 0.4), 2)


def test_sample_trace_point_mass():
    trace = sample_trace(CategoricalAnswerModel((1.0, 0.0), 0), 32, seed=1)
    assert set(trace.draws) == {0}
    assert trace.gold == 0


def test_sample_trace_deterministic():
    model = CategoricalAnswerModel((0.6, 0.4), 0)
    assert sample_trace(model, 64, 7, "x") == sample_trace(model, 64, 7, "x")
    assert sample_trace(model, 64, 7, "x") != sample_trace(model, 64, 8, "x")


def test_sample_trace_frequency_concentrates():
    model = CategoricalAnswerModel((0.6, 0.4), 0)
    trace = sample_trace(model, 10_000, seed=3)
    share = trace.draws.count(trace.gold) / 10_000
    assert abs(share - 0.6) < 0.02


def test_sample_trace_unsampled_gold_becomes_absent():
    model = CategoricalAnswerModel((0.0, 1.0), 0)
    trace = sample_trace(model, 16, seed=2)
    assert trace.gold is None
    assert set(trace.draws) == {0}


def test_exact_mv_accuracy_examples():
    assert exact_mv_accuracy(CategoricalAnswerModel((0.6, 0.4), 0), 3) \
        == pytest.approx(0.648, abs=1e-12)
    assert exact_mv_accuracy(CategoricalAnswerModel((1.0,), 0), 9) == 1.0
    assert exact_mv_accuracy(CategoricalAnswerModel((0.5, 0.5), 0), 2) \
        == pytest.approx(0.5, abs=1e-12)


def test_exact_mv_matches_brute_force_grid():
    models = [
        symmetric_model(2, 0.2),
        symmetric_model(3, 0.1),
        CategoricalAnswerModel((0.2, 0.5, 0.3), 0),
        CategoricalAnswerModel((0.25, 0.25, 0.25, 0.25), 1),
        CategoricalAnswerModel((0.05, 0.55, 0.4), 2),
    ]
    for model in models:
        for n in range(1, 11):
            if model.num_answers ** n > 5_000_000:
                continue
            assert exact_mv_accuracy(model, n) == pytest.approx(
                brute_force_mv_accuracy(model, n), abs=1e-12)


def test_exact_mv_infeasible_sizes_rejected():
    with pytest.raises(ValueError):
        exact_mv_accuracy(symmetric_model(2, 0.2), 65)
    with pytest.raises(ValueError):
        brute_force_mv_accuracy(symmetric_model(4, 0.2), 40)


def test_union_bound_closed_form():
    model = CategoricalAnswerModel((0.6, 0.4), 0)
    assert union_bound_lower(model, 50) == pytest.approx(1 - math.exp(-1.0),
                                                         abs=1e-12)


def test_union_bound_requires_positive_margin():
    with pytest.raises(ValueError):
        union_bound_lower(CategoricalAnswerModel((0.4, 0.6), 0), 10)
    with pytest.raises(ValueError):
        union_bound_lower(CategoricalAnswerModel((0.6, 0.4), 0), 0)


def test_union_bound_below_exact_on_grid():
    for m in (2, 3, 4):
        for delta in (0.1, 0.2, 0.4):
            model = symmetric_model(m, delta)
            for n in range(1, 31):
                assert exact_mv_accuracy(model, n) >= \
                    union_bound_lower(model, n) - 1e-12


def test_large_n_limits():
    # positive margins converge to 1, negative to 0; at margin 0.2 the n=63
    # binomial tail is ~0.053, so the 0.99/0.01 levels need margin 0.3
    up = symmetric_model(2, 0.2)
    assert exact_mv_accuracy(up, 63) >= 0.94
    assert exact_mv_accuracy(up, 63) > exact_mv_accuracy(up, 15)
    assert exact_mv_accuracy(symmetric_model(2, 0.3), 63) >= 0.99
    down = CategoricalAnswerModel((0.4, 0.6), 0)
    assert exact_mv_accuracy(down, 63) <= 0.06
    assert exact_mv_accuracy(CategoricalAnswerModel((0.35, 0.65), 0), 63) <= 0.01


def test_mc_mv_accuracy_agrees_with_exact():
    model = symmetric_model(3, 0.15)
    est, stderr = mc_mv_accuracy(model, 21, trials=120_000, seed=4)
    exact = exact_mv_accuracy(model, 21)
    assert abs(est - exact) <= 5 * stderr


def test_curve_pipeline_converges_to_exact_mv():
    # subsampling a sampled reference pool is marginally i.i.d. sampling
    model = CategoricalAnswerModel((0.55, 0.45), 0)
    budgets = (1, 3, 7, 15)
    exact = {n: exact_mv_accuracy(model, n) for n in budgets}
    n_seeds = 20
    err = {n: 0.0 for n in budgets}
    for seed in range(n_seeds):
        trace = sample_trace(model, 128, seed, f"s{seed}")
        params = SubsampleParams(tau=1200, seed=seed)
        curve = budget_accuracy_curve(trace, params)
        for n in budgets:
            err[n] += curve.value_at(n) - exact[n]
    for n in budgets:
        assert abs(err[n] / n_seeds) <= 0.05


def test_synth_dataset_all_t1_is_all_gold():
    result = synth_dataset(SynthSpec(counts={1: 4}, n_max=16, seed=1))
    for trace in result.dataset.traces:
        assert set(trace.draws) == {trace.gold}


def test_synth_dataset_type_recovery_at_scale():
    spec = SynthSpec(counts={4: 10}, n_max=128, seed=12,
                     margin_range_t4=(0.15, 0.30))
    result = synth_dataset(spec)
    curves = dataset_curves(result.dataset, SubsampleParams(tau=1500, seed=12))
    part = partition(curves)
    ok = sum(1 for t in part.types
             if t in (SampleType.T4_APPROX_INCREASING, SampleType.T1_CONST1))
    assert ok >= 8


def test_synth_dataset_sidecar_alignment():
    result = synth_dataset(SynthSpec(counts={1: 2, 3: 2, 5: 2}, n_max=8, seed=3))
    assert sorted(result.intended.values()) == [1, 1, 3, 3, 5, 5]
    for trace in result.dataset.traces:
        assert trace.question_id in result.intended
        stats = margin_stats(result.models[trace.question_id])
        intended = result.intended[trace.question_id]
        if intended == 3:
            assert stats.margin <= -0.15
        if intended == 5:
            assert stats.gap <= 0.02

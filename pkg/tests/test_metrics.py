from __future__ import annotations

import math

import pytest

from helpers import make_theorem1_curve_dataset
from overscale_lab.overscale_metrics import (gain, mean_curve,
                                             oracle_vs_system_values,
                                             overscaling_index,
                                             sample_optimal_n,
                                             system_optimal_n, theorem1_check,
                                             type_gain_table)
from overscale_lab.taxonomy import partition
from overscale_lab.vote_curve import BudgetAccuracyCurve


def curve(vals):
    return BudgetAccuracyCurve(tuple(vals), len(vals))


def test_sample_optimal_constant_curve():
    assert sample_optimal_n(curve([0.5] * 6)).n_star == 1


def test_sample_optimal_smallest_argmax():
    opt = sample_optimal_n(curve([0.5, 0.6, 0.6, 0.6]))
    assert opt.n_star == 2 and opt.max_acc == 0.6


def test_sample_optimal_tolerance_rule():
    c = curve([0.5, 0.6, 0.6 + 1e-10, 0.6])
    assert sample_optimal_n(c, eps_acc=1e-9).n_star == 2


def test_sample_optimal_ignores_tail_below_tolerance():
    base = [0.5, 0.9, 0.9]
    extended = base + [0.9 - 5e-9, 0.2]
    assert sample_optimal_n(curve(base)).n_star == \
        sample_optimal_n(curve(extended)).n_star == 2


def test_system_optimal_examples():
    c1 = curve([1, 1, 1, 1])
    c2 = curve([0, 0.5, 1, 1])
    assert system_optimal_n([c1, c2]) == 3
    assert system_optimal_n([c1]) == sample_optimal_n(c1).n_star
    assert system_optimal_n([curve([0.3] * 5), curve([0.7] * 5)]) == 1


def test_gain_examples():
    c = curve([0.2, 0.5, 0.9])
    assert gain(c, 1, 3) == pytest.approx(0.7)
    assert gain(c, 2, 2) == 0.0
    assert gain(c, 1, 3) == -gain(c, 3, 1)


def test_overscaling_report_two_curve_example():
    report = overscaling_index([curve([1, 1, 1, 1]), curve([0, 0.5, 1, 1])])
    assert report.n_star_dataset == 2.0
    assert report.n_system == 3
    assert report.index == pytest.approx(2 / 3)


def test_overscaling_all_constant_ones():
    report = overscaling_index([curve([1.0] * 8)] * 3)
    assert report.index == 1.0
    assert report.per_type_n_star[0] == 1.0
    assert report.per_type_n_star[3] is None


def test_index_within_stated_range():
    for seed in range(5):
        curves = make_theorem1_curve_dataset(seed, p4=0.4)
        report = overscaling_index(curves)
        n_max = curves[0].n_max
        assert 1 / n_max <= report.index <= n_max


def test_theorem1_all_t4_shared_optimum():
    n_max = 32
    vals = [min(1.0, 0.2 + 0.1 * (n - 1)) for n in range(1, n_max + 1)]
    curves = [curve(vals)] * 5
    report = theorem1_check(curves)
    assert report.inputs.p4 == 1.0
    assert math.isinf(report.inputs.delta)
    assert report.phi == pytest.approx(1.0)
    assert report.m_d <= 1.0 + 1e-9
    assert report.holds


def test_theorem1_without_t4():
    curves = [curve([1.0] * 16)] * 2 + [curve([0.0] * 16)] * 2 \
        + [curve([0.5] + [0.4] * 15)] * 2
    report = theorem1_check(curves)
    assert report.inputs.p4 == 0.0
    assert report.phi == pytest.approx(report.inputs.kappa)
    assert report.holds


def test_theorem1_synthetic_suite_small():
    met = 0
    for seed in range(6):
        for p4 in (0.2, 0.5, 0.8):
            curves = make_theorem1_curve_dataset(seed * 31 + 1, p4=p4)
            report = theorem1_check(curves)
            if report.assumptions_met:
                met += 1
                assert report.holds
    assert met >= 15


def test_oracle_inequality_every_dataset():
    for seed in range(4):
        curves = make_theorem1_curve_dataset(seed, p4=0.3)
        lhs, rhs = oracle_vs_system_values(curves)
        assert lhs >= rhs - 1e-12


def test_mean_curve_requires_consistent_lengths():
    with pytest.raises(ValueError):
        mean_curve([curve([0.1, 0.2]), curve([0.1, 0.2, 0.3])])


def test_type_gain_table_shape():
    curves = make_theorem1_curve_dataset(3, p4=0.4)
    rows = type_gain_table(curves, part=partition(curves))
    assert [r["type"] for r in rows] == [1, 2, 3, 4, 5]
    t1 = rows[0]
    assert t1["gain_1_to_n4star"] == pytest.approx(0.0, abs=1e-12)

"""Metric oracles and properties."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfmprobe.datastore import SfmAttributes, SfmDescriptor
from sfmprobe.exceptions import DomainError, ShapeError, UndefinedCorrelationError
from sfmprobe.metrics import (
    MetricReport,
    attribute_rank_correlations,
    average_ranks,
    fold_report,
    ncc,
    rank_correlation,
    rmse,
)

# -- rmse --------------------------------------------------------------------------


def test_rmse_zero_on_equal_vectors():
    assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0


def test_rmse_hand_value():
    assert rmse([13.0, 24.0], [10.0, 20.0]) == pytest.approx(math.sqrt(12.5), rel=1e-15)


def test_rmse_translation_invariance(rng):
    p = rng.normal(size=20)
    t = rng.normal(size=20)
    assert rmse(p + 7.5, t + 7.5) == pytest.approx(rmse(p, t), rel=1e-12)


def test_rmse_symmetry_and_scaling(rng):
    p = rng.normal(size=15)
    t = rng.normal(size=15)
    assert rmse(p, t) == rmse(t, p)
    assert rmse(3 * p, 3 * t) == pytest.approx(3 * rmse(p, t), rel=1e-12)


def test_rmse_errors():
    with pytest.raises(DomainError):
        rmse([], [])
    with pytest.raises(ShapeError):
        rmse([1.0], [1.0, 2.0])


# -- ncc ---------------------------------------------------------------------------


def test_ncc_affine_positive_slope_is_one(rng):
    t = rng.normal(size=30)
    assert ncc(2 * t + 1, t) == pytest.approx(1.0, abs=1e-12)


def test_ncc_negation_is_minus_one(rng):
    t = rng.normal(size=30)
    assert ncc(-t, t) == pytest.approx(-1.0, abs=1e-12)


def test_ncc_hand_value():
    # pearson([1,2,3],[1,2,4]) = 9 / (2*sqrt(21))
    assert ncc([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]) == pytest.approx(
        9.0 / (2.0 * math.sqrt(21.0)), rel=1e-12
    )


def test_ncc_affine_invariance_and_sign_flip(rng):
    p = rng.normal(size=25)
    t = rng.normal(size=25)
    base = ncc(p, t)
    assert ncc(3.0 * p + 11.0, t) == pytest.approx(base, abs=1e-12)
    assert ncc(-2.0 * p, t) == pytest.approx(-base, abs=1e-12)


def test_ncc_constant_input_is_hard_error():
    with pytest.raises(UndefinedCorrelationError):
        ncc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        ncc([1.0], [1.0])


# -- brute-force cross-checks ---------------------------------------------------------


def _rmse_loops(pred, target):
    total = 0.0
    for p, t in zip(pred, target):
        total += (p - t) ** 2
    return math.sqrt(total / len(pred))


def _pearson_loops(pred, target):
    n = len(pred)
    mp = sum(pred) / n
    mt = sum(target) / n
    num = sum((p - mp) * (t - mt) for p, t in zip(pred, target))
    dp = math.sqrt(sum((p - mp) ** 2 for p in pred))
    dt = math.sqrt(sum((t - mt) ** 2 for t in target))
    return num / (dp * dt)


def test_metrics_agree_with_bruteforce_oracles(rng):
    for _ in range(200):
        n = int(rng.integers(2, 40))
        p = rng.normal(50, 20, n)
        t = rng.normal(50, 20, n)
        assert abs(rmse(p, t) - _rmse_loops(p, t)) < 1e-9
        assert abs(ncc(p, t) - _pearson_loops(p, t)) < 1e-9


# -- spearman -------------------------------------------------------------------------


def test_rank_correlation_identity_and_reverse():
    assert rank_correlation([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]) == pytest.approx(1.0)
    assert rank_correlation([1, 2, 3, 4, 5], [5, 4, 3, 2, 1]) == pytest.approx(-1.0)


def test_rank_correlation_hand_value():
    # one adjacent swap in a permutation of 5: 1 - 6*2/120 = 0.9
    assert rank_correlation([1, 2, 3, 4, 5], [2, 1, 3, 4, 5]) == pytest.approx(0.9, rel=1e-12)


def test_rank_correlation_matches_rank_then_pearson_exactly(rng):
    def brute_ranks(v):
        # enumeration-based average ranking, independent of argsort
        v = list(v)
        out = []
        for x in v:
            less = sum(1 for y in v if y < x)
            equal = sum(1 for y in v if y == x)
            out.append(less + (equal + 1) / 2.0)
        return np.array(out)

    for _ in range(50):
        n = int(rng.integers(2, 25))
        a = rng.integers(0, 8, n).astype(float)  # ties likely
        b = rng.normal(size=n)
        if np.all(a == a[0]):
            continue
        expected = ncc(brute_ranks(a), brute_ranks(b))
        assert rank_correlation(a, b) == expected


def test_rank_correlation_matches_scipy(rng):
    from scipy.stats import spearmanr

    for _ in range(30):
        n = int(rng.integers(3, 30))
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        assert rank_correlation(a, b) == pytest.approx(
            float(spearmanr(a, b).statistic), abs=1e-12
        )


def test_average_ranks_ties():
    assert np.allclose(average_ranks([10.0, 20.0, 20.0, 30.0]), [1.0, 2.5, 2.5, 4.0])


def test_rank_correlation_length_mismatch():
    with pytest.raises(ShapeError):
        rank_correlation([1, 2], [1, 2, 3])


# -- fold reports -----------------------------------------------------------------------


def test_fold_report_identical_folds_mean_equals_fold_value(rng):
    t = rng.normal(50, 10, 20)
    p = t + rng.normal(0, 2, 20)
    report = fold_report([(p, t)] * 3, config_id="c")
    assert report.mean_rmse == pytest.approx(report.fold_rmse[0])
    assert report.mean_ncc == pytest.approx(report.fold_ncc[0])


def test_fold_report_mean_arithmetic():
    pairs = []
    for target_rmse in (2.0, 4.0, 6.0):
        n = 8
        t = np.full(n, 50.0)
        p = t + target_rmse * np.array([1.0, -1.0] * (n // 2))
        t = t + np.linspace(-1e-9, 1e-9, n)  # avoid constant-target error
        pairs.append((p, t))
    report = fold_report(pairs)
    assert report.mean_rmse == pytest.approx(4.0, rel=1e-6)


def test_fold_report_serialization_round_trip(rng):
    t = rng.normal(50, 10, 12)
    report = fold_report([(t + 1, t), (t + 2, t)], config_id="cfg")
    back = MetricReport.from_dict(report.to_dict())
    assert back == report


def test_fold_report_propagates_errors_with_fold_index():
    t = np.ones(5)
    with pytest.raises(UndefinedCorrelationError, match="fold 1"):
        fold_report([(t + np.arange(5), t + np.arange(5) * 2), (t, t * 2)])


def test_fold_report_mean_permutation_invariant(rng):
    pairs = []
    for _ in range(3):
        t = rng.normal(50, 10, 10)
        pairs.append((t + rng.normal(0, 3, 10), t))
    a = fold_report(pairs)
    b = fold_report(pairs[::-1])
    assert a.mean_rmse == pytest.approx(b.mean_rmse, rel=1e-15)
    assert a.mean_ncc == pytest.approx(b.mean_ncc, rel=1e-15)


def test_fold_report_requires_folds():
    with pytest.raises(DomainError):
        fold_report([])


# -- attribute analysis -------------------------------------------------------------------


def _sfm(name, wer, hours, date, tasks):
    return SfmDescriptor(name, 4, 8, SfmAttributes(wer, hours, date, tasks))


def test_attribute_rank_correlations_orientation():
    # perfect alignment: lower WER <-> lower RMSE
    sfms = [
        _sfm("a", 5.0, 100, "2020.01", 1),
        _sfm("b", 6.0, 200, "2021.01", 2),
        _sfm("c", 7.0, 300, "2022.01", 3),
    ]
    scores = {"a": 20.0, "b": 21.0, "c": 22.0}
    out = attribute_rank_correlations(sfms, scores)
    assert out["asr_wer"] == pytest.approx(1.0)
    # more data ranks higher but performance is worse here -> -1
    assert out["data_hours"] == pytest.approx(-1.0)
    assert out["arch_date"] == pytest.approx(-1.0)
    assert out["train_task_count"] == pytest.approx(-1.0)


def test_attribute_rank_correlations_requires_scores():
    sfms = [_sfm("a", 5.0, 100, "2020.01", 1), _sfm("b", 6.0, 200, "2021.01", 2)]
    with pytest.raises(DomainError):
        attribute_rank_correlations(sfms, {"a": 20.0})


# -- properties ------------------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-100, 100), min_size=2, max_size=30),
    st.floats(-50, 50),
)
def test_property_rmse_translation(values, shift):
    p = np.array(values)
    t = np.zeros_like(p)
    assert rmse(p + shift, t + shift) == pytest.approx(rmse(p, t), abs=1e-9)

"""Softmax-weighted ensembles: fitting, prediction, enumeration, and
weight statistics."""
import math

import numpy as np
import pytest

from sfmprobe.ensemble import (
    EnsembleModel,
    MemberPredictions,
    ensemble_predict,
    enumerate_combinations,
    fit_ensemble,
    weight_distribution,
)
from sfmprobe.exceptions import AlignmentError, DomainError
from sfmprobe.metrics import rmse


def _preds(member_vectors: dict[str, np.ndarray]):
    ids = [f"s{i}" for i in range(len(next(iter(member_vectors.values()))))]
    return MemberPredictions(
        {m: dict(zip(ids, v)) for m, v in member_vectors.items()}
    ), ids


def test_member_predictions_require_aligned_ids():
    with pytest.raises(AlignmentError, match="s2"):
        MemberPredictions(
            {"a": {"s1": 1.0, "s2": 2.0}, "b": {"s1": 1.0}}
        )


def test_identical_members_keep_symmetric_weights(rng):
    t = rng.normal(50, 10, 40)
    preds, ids = _preds({"a": t + 1.0, "b": t + 1.0})
    model = fit_ensemble(preds, dict(zip(ids, t)))
    assert np.allclose(model.weights, [0.5, 0.5], atol=1e-12)


def test_exact_member_dominates_noisy_member(rng):
    t = rng.normal(50.0, 12.0, 200)
    noisy = t + rng.normal(0.0, 25.0, 200)
    preds, ids = _preds({"exact": t, "noisy": noisy})
    model = fit_ensemble(preds, dict(zip(ids, t)))
    weight = dict(zip(model.member_ids, model.weights))
    assert weight["exact"] > 0.9
    # 1-D brute-force scan confirms the optimum is near one-hot
    grid = np.linspace(0, 1, 201)
    losses = [rmse(w * t + (1 - w) * noisy, t) for w in grid]
    assert grid[int(np.argmin(losses))] > 0.95


def test_single_member_weight_is_one(rng):
    t = rng.normal(50, 10, 10)
    preds, ids = _preds({"only": t})
    model = fit_ensemble(preds, dict(zip(ids, t)))
    assert np.allclose(model.weights, [1.0])


def test_fitted_val_rmse_not_worse_than_best_member(rng):
    # includes the hard case: one member exact, others mostly noise
    t = rng.normal(50.0, 12.0, 300)
    members = {
        "exact": t,
        "noisy": t + rng.normal(0, 30.0, 300),
        "biased": t + 8.0 + rng.normal(0, 5.0, 300),
    }
    preds, ids = _preds(members)
    targets = dict(zip(ids, t))
    model = fit_ensemble(preds, targets)
    y = preds.aligned_targets(targets)
    fitted_rmse = rmse(ensemble_predict(model, preds), y)
    best_member = min(rmse(v, t) for v in members.values())
    assert fitted_rmse <= best_member + 0.1


def test_ensemble_predict_weights():
    model = EnsembleModel(("a", "b", "c"), (math.log(2.0), 0.0, 0.0))
    assert np.allclose(model.weights, [0.5, 0.25, 0.25])
    preds, _ = _preds({
        "a": np.array([40.0]),
        "b": np.array([20.0]),
        "c": np.array([20.0]),
    })
    assert ensemble_predict(model, preds)[0] == pytest.approx(30.0)


def test_ensemble_predict_equal_weights_is_mean():
    model = EnsembleModel(("a", "b", "c"), (0.0, 0.0, 0.0))
    preds, _ = _preds({
        "a": np.array([10.0]), "b": np.array([20.0]), "c": np.array([30.0])
    })
    assert ensemble_predict(model, preds)[0] == pytest.approx(20.0)


def test_ensemble_predict_concentrated_weight_selects_member():
    model = EnsembleModel(("a", "b", "c"), (60.0, 0.0, 0.0))
    preds, _ = _preds({
        "a": np.array([11.0, 12.0]),
        "b": np.array([99.0, 99.0]),
        "c": np.array([99.0, 99.0]),
    })
    assert np.allclose(ensemble_predict(model, preds), [11.0, 12.0], atol=1e-6)


def test_ensemble_predict_rejects_member_mismatch(rng):
    model = EnsembleModel(("a", "b"), (0.0, 0.0))
    preds, _ = _preds({"a": np.zeros(3), "c": np.zeros(3)})
    with pytest.raises(AlignmentError):
        ensemble_predict(model, preds)


def test_ensemble_predict_linear_in_member_predictions(rng):
    model = EnsembleModel(("a", "b"), (0.3, -0.2))
    p1, _ = _preds({"a": rng.normal(size=5), "b": rng.normal(size=5)})
    p2, _ = _preds({"a": rng.normal(size=5), "b": rng.normal(size=5)})
    combined, _ = _preds({
        "a": 2 * p1.matrix[0] + 3 * p2.matrix[0],
        "b": 2 * p1.matrix[1] + 3 * p2.matrix[1],
    })
    lhs = ensemble_predict(model, combined)
    rhs = 2 * ensemble_predict(model, p1) + 3 * ensemble_predict(model, p2)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_weights_are_convex_and_shift_invariant(rng):
    logits = rng.normal(size=4)
    a = EnsembleModel(("a", "b", "c", "d"), tuple(logits))
    b = EnsembleModel(("a", "b", "c", "d"), tuple(logits + 31.25))
    assert (a.weights > 0).all()
    assert abs(a.weights.sum() - 1.0) < 1e-12
    assert np.allclose(a.weights, b.weights, atol=1e-14)


def test_enumerate_combinations_contracts():
    combos = enumerate_combinations(["m1", "m2", "m3", "m4", "m5"], 3)
    assert len(combos) == 10
    assert combos == sorted(combos)  # lexicographic
    assert enumerate_combinations(["a", "b"], 2) == [("a", "b")]
    assert enumerate_combinations(["c", "a", "b"], 2) == [
        ("a", "b"), ("a", "c"), ("b", "c")
    ]
    with pytest.raises(DomainError):
        enumerate_combinations(["a", "b"], 3)
    with pytest.raises(DomainError):
        enumerate_combinations(["a", "b"], 0)


def test_weight_distribution_stats():
    models = [
        EnsembleModel(("a", "b"), (math.log(0.2 / 0.8), 0.0)),
        EnsembleModel(("a", "c"), (math.log(0.4 / 0.6), 0.0)),
        EnsembleModel(("a", "d"), (math.log(0.6 / 0.4), 0.0)),
    ]
    stats = weight_distribution(models)
    assert stats["a"]["median"] == pytest.approx(0.4, abs=1e-12)
    assert stats["a"]["min"] == pytest.approx(0.2, abs=1e-12)
    assert stats["a"]["max"] == pytest.approx(0.6, abs=1e-12)
    assert stats["a"]["count"] == 3


def test_weight_distribution_uniform_three_member():
    models = [
        EnsembleModel(("a", "b", "c"), (0.0, 0.0, 0.0)),
        EnsembleModel(("a", "b", "d"), (0.0, 0.0, 0.0)),
    ]
    stats = weight_distribution(models)
    for member in ("a", "b"):
        assert stats[member]["median"] == pytest.approx(1 / 3)


def test_weight_distribution_permutation_invariant(rng):
    models = [
        EnsembleModel(("a", "b"), tuple(rng.normal(size=2))) for _ in range(5)
    ]
    assert weight_distribution(models) == weight_distribution(models[::-1])


def test_weight_distribution_absent_member_rejected():
    models = [EnsembleModel(("a", "b"), (0.0, 0.0))]
    with pytest.raises(DomainError):
        weight_distribution(models, members=["z"])
    with pytest.raises(DomainError):
        weight_distribution([])


def test_noise_ensemble_beats_members(rng):
    # equal-variance independent-noise members: the fitted 3-ensemble
    # should approach the 1/sqrt(3) variance reduction
    t = rng.normal(50.0, 12.0, 400)
    sigma = 6.0
    members = {m: t + rng.normal(0, sigma, 400) for m in ("a", "b", "c")}
    preds, ids = _preds(members)
    targets = dict(zip(ids, t))
    model = fit_ensemble(preds, targets)
    fitted = rmse(ensemble_predict(model, preds), preds.aligned_targets(targets))
    mean_member = np.mean([rmse(v, t) for v in members.values()])
    assert fitted < 0.75 * mean_member

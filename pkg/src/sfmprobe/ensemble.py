"""Softmax-weighted ensembles of per-model predictions.

Member predictions are combined by a convex weight vector (softmax of
learned logits, so weights are strictly positive and sum to one).
Weights are fitted on the validation split by gradient descent on the
Huber loss and reported on test, never the other way around.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sfmprobe.exceptions import AlignmentError, DomainError
from sfmprobe.numerics import AdamState, ParamSet, Tensor, adam_step, huber_loss, softmax

# 1000 full-batch steps: enough for the softmax to reach a near-one-hot
# optimum when one member strictly dominates (500 leaves a visible gap).
FIT_STEPS = 1000
FIT_LR = 1e-2


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


@dataclass(frozen=True)
class EnsembleModel:
    member_ids: tuple[str, ...]
    logits: tuple[float, ...]

    def __post_init__(self):
        if len(self.member_ids) != len(self.logits):
            raise DomainError("one logit per member required")
        if len(self.member_ids) < 1:
            raise DomainError("ensemble needs at least one member")

    @property
    def weights(self) -> np.ndarray:
        return _softmax(np.array(self.logits, dtype=np.float64))

    def to_dict(self) -> dict:
        return {
            "member_ids": list(self.member_ids),
            "logits": list(self.logits),
            "weights": [float(w) for w in self.weights],
        }


class MemberPredictions:
    """Per-member prediction vectors aligned on a shared sample-id list."""

    def __init__(self, predictions: dict[str, dict[str, float]]):
        if not predictions:
            raise DomainError("no members")
        members = sorted(predictions)
        id_sets = {m: set(predictions[m]) for m in members}
        union = set().union(*id_sets.values())
        offenders = {
            m: sorted(union - id_sets[m]) for m in members if id_sets[m] != union
        }
        if offenders:
            details = "; ".join(f"{m} missing {v[:3]}" for m, v in offenders.items())
            raise AlignmentError(f"members disagree on sample ids: {details}")
        self.member_ids = tuple(members)
        self.sample_ids = tuple(sorted(union))
        self.matrix = np.array(
            [[predictions[m][sid] for sid in self.sample_ids] for m in members],
            dtype=np.float64,
        )

    def aligned_targets(self, targets: dict[str, float]) -> np.ndarray:
        missing = [sid for sid in self.sample_ids if sid not in targets]
        if missing:
            raise AlignmentError(f"targets missing for: {missing[:5]}")
        return np.array([targets[sid] for sid in self.sample_ids], dtype=np.float64)


def fit_ensemble(
    preds: MemberPredictions,
    targets: dict[str, float] | np.ndarray,
    steps: int = FIT_STEPS,
    lr: float = FIT_LR,
    huber_delta: float = 1.0,
) -> EnsembleModel:
    """Fit member logits by full-batch Adam on the Huber loss of the
    weighted-average prediction. Deterministic: logits start uniform
    (all zero) and no sampling is involved."""
    if isinstance(targets, dict):
        y = preds.aligned_targets(targets)
    else:
        y = np.asarray(targets, dtype=np.float64).reshape(-1)
        if y.shape[0] != preds.matrix.shape[1]:
            raise AlignmentError(
                f"{y.shape[0]} targets for {preds.matrix.shape[1]} samples"
            )
    m = len(preds.member_ids)
    params = ParamSet()
    logits = params.add("logits", np.zeros(m))
    state = AdamState.for_params(params)
    member_matrix = Tensor(preds.matrix)
    if m == 1:
        return EnsembleModel(member_ids=preds.member_ids, logits=(0.0,))
    for _ in range(steps):
        params.zero_grad()
        weights = softmax(logits, axis=-1)
        combined = (weights.reshape(1, m).matmul(member_matrix)).reshape(y.shape[0])
        loss = huber_loss(combined, y, delta=huber_delta)
        loss.backward()
        adam_step(params, params.grads(), state, lr)
    return EnsembleModel(
        member_ids=preds.member_ids,
        logits=tuple(float(v) for v in logits.data),
    )


def ensemble_predict(model: EnsembleModel, preds: MemberPredictions) -> np.ndarray:
    """Convex combination of member predictions, one score per sample."""
    if model.member_ids != preds.member_ids:
        raise AlignmentError(
            f"model members {model.member_ids} != prediction members {preds.member_ids}"
        )
    return model.weights @ preds.matrix


def enumerate_combinations(members: Sequence[str], k: int) -> list[tuple[str, ...]]:
    """All C(n, k) member combinations in lexicographic order."""
    if k < 1 or k > len(members):
        raise DomainError(f"k={k} outside [1, {len(members)}]")
    return list(itertools.combinations(sorted(members), k))


def weight_distribution(
    models: Sequence[EnsembleModel], members: Sequence[str] | None = None
) -> dict[str, dict[str, float]]:
    """Order statistics of each member's fitted weight across the
    ensembles that contain it."""
    if not models:
        raise DomainError("no fitted ensembles")
    samples: dict[str, list[float]] = {}
    for model in models:
        for member, weight in zip(model.member_ids, model.weights):
            samples.setdefault(member, []).append(float(weight))
    if members is None:
        members = sorted(samples)
    out = {}
    for member in members:
        if member not in samples:
            raise DomainError(f"member {member!r} absent from all ensembles")
        values = np.array(samples[member], dtype=np.float64)
        q = np.percentile(values, [0, 25, 50, 75, 100])
        out[member] = {
            "min": float(q[0]),
            "q1": float(q[1]),
            "median": float(q[2]),
            "q3": float(q[3]),
            "max": float(q[4]),
            "count": int(values.size),
        }
    return out

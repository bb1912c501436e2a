"""Evaluation metrics and per-fold aggregation.

RMSE and the Pearson correlation of predictions against ground truth,
three-fold report assembly, and Spearman rank correlation for the
attribute analysis. Correlation of a constant vector raises instead of
silently returning 0 so degenerate runs cannot contaminate sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sfmprobe.datastore.manifest import SfmDescriptor
from sfmprobe.exceptions import DomainError, ShapeError, UndefinedCorrelationError


def _pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise ShapeError(f"length mismatch: {p.shape[0]} vs {t.shape[0]}")
    if p.size == 0:
        raise DomainError("empty vectors")
    return p, t


def rmse(pred, target) -> float:
    p, t = _pair(pred, target)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def ncc(pred, target) -> float:
    """Pearson correlation coefficient in [-1, 1]."""
    p, t = _pair(pred, target)
    if p.size < 2:
        raise DomainError("correlation needs at least 2 points")
    pc = p - p.mean()
    tc = t - t.mean()
    denom = np.sqrt((pc * pc).sum() * (tc * tc).sum())
    if denom == 0.0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    return float(np.clip((pc * tc).sum() / denom, -1.0, 1.0))


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties averaged."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_correlation(a, b) -> float:
    """Spearman coefficient: Pearson correlation of averaged-tie ranks."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.size < 2:
        raise DomainError("rank correlation needs at least 2 points")
    return ncc(average_ranks(a), average_ranks(b))


@dataclass(frozen=True)
class MetricReport:
    config_id: str
    fold_rmse: tuple[float, ...]
    fold_ncc: tuple[float, ...]

    @property
    def mean_rmse(self) -> float:
        return float(np.mean(self.fold_rmse))

    @property
    def mean_ncc(self) -> float:
        return float(np.mean(self.fold_ncc))

    def to_dict(self) -> dict:
        return {
            "config_id": self.config_id,
            "fold_rmse": list(self.fold_rmse),
            "fold_ncc": list(self.fold_ncc),
            "mean_rmse": self.mean_rmse,
            "mean_ncc": self.mean_ncc,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricReport":
        return cls(
            config_id=doc["config_id"],
            fold_rmse=tuple(doc["fold_rmse"]),
            fold_ncc=tuple(doc["fold_ncc"]),
        )


def fold_report(fold_pairs, config_id: str = "") -> MetricReport:
    """Per-fold metrics plus arithmetic means over (pred, target) pairs."""
    if not fold_pairs:
        raise DomainError("fold_report needs at least one fold")
    rmses, nccs = [], []
    for i, (pred, target) in enumerate(fold_pairs):
        try:
            rmses.append(rmse(pred, target))
            nccs.append(ncc(pred, target))
        except (DomainError, ShapeError) as exc:
            raise type(exc)(f"fold {i}: {exc}") from exc
    return MetricReport(config_id=config_id, fold_rmse=tuple(rmses), fold_ncc=tuple(nccs))


# Attribute orientation: True when larger raw values should rank higher.
_ATTRIBUTE_ASCENDING = {
    "asr_wer": False,         # lower WER -> higher rank
    "data_hours": True,       # more data -> higher rank
    "arch_date": True,        # newer architecture -> higher rank
    "train_task_count": True, # more training tasks -> higher rank
}


def attribute_rank_correlations(
    sfms: list[SfmDescriptor], rmse_by_name: dict[str, float]
) -> dict[str, float]:
    """Spearman correlation between each SFM attribute ranking and the
    task-performance ranking (lower RMSE ranks higher)."""
    if len(sfms) < 2:
        raise DomainError("need at least two SFMs to correlate rankings")
    missing = [s.name for s in sfms if s.name not in rmse_by_name]
    if missing:
        raise DomainError(f"no performance score for: {missing}")
    perf = [-rmse_by_name[s.name] for s in sfms]
    out = {}
    for attr, ascending in _ATTRIBUTE_ASCENDING.items():
        raw = [getattr(s.attributes, attr) for s in sfms]
        if attr == "arch_date":
            raw = [float(v.replace(".", "")) for v in raw]
        values = [v if ascending else -v for v in raw]
        out[attr] = rank_correlation(values, perf)
    return out

"""Listener-disjoint three-fold train/val/test splitting.

Listeners (never clips) are partitioned, so no listener contributes to
more than one of train/val/test within a fold. The shuffled listener
ring is rotated by a third per fold; proportions default to roughly
70/15/15 by listener count.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from sfmprobe.datastore.manifest import Sample
from sfmprobe.exceptions import DomainError

N_FOLDS = 3


@dataclass(frozen=True)
class FoldPartition:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def part(self, name: str) -> tuple[str, ...]:
        if name not in ("train", "val", "test"):
            raise DomainError(f"unknown partition {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class FoldSplit:
    folds: tuple[FoldPartition, ...]

    def __post_init__(self):
        if len(self.folds) != N_FOLDS:
            raise DomainError(f"expected {N_FOLDS} folds, got {len(self.folds)}")


def make_splits(
    samples: Sequence[Sample],
    seed: int,
    val_fraction: float = 0.15,
    test_fraction: float = 0.15,
) -> FoldSplit:
    """Deterministic listener-level split into three rotated folds.

    Per fold, every listener lands in exactly one of train/val/test and
    every sample follows its listener; val and test each get at least
    one listener.
    """
    listeners = sorted({s.listener_id for s in samples})
    n = len(listeners)
    if n < 3:
        raise DomainError(f"need >= 3 distinct listeners, got {n}")
    rng = np.random.default_rng(np.random.PCG64(seed))
    order = [listeners[i] for i in rng.permutation(n)]

    n_val = max(1, round(val_fraction * n))
    n_test = max(1, round(test_fraction * n))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise DomainError(f"{n} listeners cannot fill train/val/test")

    by_listener: dict[str, list[str]] = {lid: [] for lid in listeners}
    for s in samples:
        by_listener[s.listener_id].append(s.sample_id)

    folds = []
    step = n // N_FOLDS
    for fold in range(N_FOLDS):
        offset = fold * step
        ring = order[offset:] + order[:offset]
        groups = {
            "train": ring[:n_train],
            "val": ring[n_train:n_train + n_val],
            "test": ring[n_train + n_val:],
        }
        ids = {
            part: tuple(sid for lid in members for sid in by_listener[lid])
            for part, members in groups.items()
        }
        folds.append(FoldPartition(train=ids["train"], val=ids["val"], test=ids["test"]))
    return FoldSplit(folds=tuple(folds))


def split_to_dict(split: FoldSplit) -> dict:
    return {
        "folds": [
            {"train": list(f.train), "val": list(f.val), "test": list(f.test)}
            for f in split.folds
        ]
    }


def split_from_dict(doc: dict) -> FoldSplit:
    folds = tuple(
        FoldPartition(
            train=tuple(f["train"]), val=tuple(f["val"]), test=tuple(f["test"])
        )
        for f in doc["folds"]
    )
    return FoldSplit(folds=folds)


def write_split(split: FoldSplit, path: str | Path, extra: dict | None = None) -> None:
    doc = split_to_dict(split)
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_split(path: str | Path) -> FoldSplit:
    return split_from_dict(json.loads(Path(path).read_text()))

"""Mini-batch training loop with per-epoch validation and checkpoint
selection by lowest validation RMSE."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sfmprobe.datastore.format import LayerFeatureTensor, read_feature_file
from sfmprobe.datastore.manifest import Manifest
from sfmprobe.exceptions import DomainError, TrainingDivergedError
from sfmprobe.heads import Arch, HeadConfig, head_apply, init_head, save_checkpoint, select_layers
from sfmprobe.metrics import ncc, rmse
from sfmprobe.numerics import (
    AdamState,
    ParamSet,
    ScheduleSpec,
    Tensor,
    adam_step,
    huber_loss,
    lr_at,
    no_grad,
)
from sfmprobe.provenance import stable_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainRecipe:
    schedule: ScheduleSpec
    batch_size: int = 128
    huber_delta: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.schedule.total_epochs < 1:
            raise DomainError("need at least one epoch")

    @property
    def epochs(self) -> int:
        return self.schedule.total_epochs


def default_recipe(arch: Arch, seed: int = 0) -> TrainRecipe:
    """The published training recipe per architecture family.

    WA_TGP: cosine 1e-4 -> 1e-6 over 50 epochs. Transformer heads
    (WA_TT, DT): 10-epoch linear warmup (start factor 0.1) into cosine
    3e-5 -> 1e-6. Batch 128, Huber loss, Adam betas (0.9, 0.98).
    """
    arch = Arch(arch)
    if arch is Arch.WA_TGP:
        schedule = ScheduleSpec(kind="cosine", base_lr=1e-4, min_lr=1e-6, total_epochs=50)
    else:
        schedule = ScheduleSpec(
            kind="warmup-cosine",
            base_lr=3e-5,
            min_lr=1e-6,
            total_epochs=50,
            warmup_epochs=10,
            start_factor=0.1,
        )
    return TrainRecipe(schedule=schedule, seed=seed)


@dataclass(frozen=True)
class EpochStats:
    train_loss: float
    val_rmse: float
    val_ncc: float
    lr: float


@dataclass
class RunRecord:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    best_val_rmse: float = float("inf")
    checkpoint_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "epochs": [
                {"train_loss": e.train_loss, "val_rmse": e.val_rmse,
                 "val_ncc": e.val_ncc, "lr": e.lr}
                for e in self.epochs
            ],
            "best_epoch": self.best_epoch,
            "best_val_rmse": self.best_val_rmse,
            "checkpoint_path": self.checkpoint_path,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        rec = cls(
            epochs=[
                EpochStats(
                    train_loss=e["train_loss"], val_rmse=e["val_rmse"],
                    val_ncc=e["val_ncc"], lr=e["lr"],
                )
                for e in doc["epochs"]
            ],
            best_epoch=doc["best_epoch"],
            best_val_rmse=doc["best_val_rmse"],
            checkpoint_path=doc.get("checkpoint_path"),
        )
        return rec


def select_checkpoint(record: RunRecord) -> int:
    """Index of the epoch with lowest validation RMSE; ties go to the
    earliest epoch."""
    if not record.epochs:
        raise DomainError("empty run record")
    vals = [e.val_rmse for e in record.epochs]
    return int(np.argmin(vals))


class FeatureBatches:
    """Feature/audiogram/score arrays for a fixed id list, grouped by
    frame count so each group batches into one dense tensor."""

    def __init__(self, manifest: Manifest, ids: list[str], config: HeadConfig,
                 cache: dict[str, LayerFeatureTensor] | None = None):
        by_id = manifest.by_id()
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise DomainError(f"ids not in manifest: {missing[:5]}")
        self.ids = list(ids)
        self.scores = np.array([by_id[i].score for i in ids], dtype=np.float64)
        cache = cache if cache is not None else {}
        feats, audios = [], []
        for sid in ids:
            sample = by_id[sid]
            if sid not in cache:
                cache[sid] = read_feature_file(manifest.feature_file(sample))
            feats.append(select_layers(cache[sid].values, config).astype(np.float64))
            audios.append(sample.audiogram.as_array())
        self._feats = feats
        self._audios = audios

    def __len__(self) -> int:
        return len(self.ids)

    def batches(self, order: np.ndarray, batch_size: int):
        """Yield (feature Tensor, audio Tensor, target array) batches in
        `order`, subgrouped by frame count; the last partial batch is kept."""
        for start in range(0, len(order), batch_size):
            chunk = order[start:start + batch_size]
            by_frames: dict[int, list[int]] = {}
            for i in chunk:
                by_frames.setdefault(self._feats[i].shape[2], []).append(int(i))
            for idx in by_frames.values():
                feats = Tensor(np.stack([self._feats[i] for i in idx]))
                audio = Tensor(np.stack([self._audios[i] for i in idx]))
                yield feats, audio, self.scores[idx]

    def predict(self, params: ParamSet, config: HeadConfig) -> np.ndarray:
        """Deterministic full-set predictions in id order."""
        out = np.empty(len(self.ids), dtype=np.float64)
        by_frames: dict[int, list[int]] = {}
        for i in range(len(self.ids)):
            by_frames.setdefault(self._feats[i].shape[2], []).append(i)
        with no_grad():
            for idx in by_frames.values():
                feats = Tensor(np.stack([self._feats[i] for i in idx]))
                audio = Tensor(np.stack([self._audios[i] for i in idx]))
                out[idx] = head_apply(feats, audio, params, config).data
        return out


def train_step(
    params: ParamSet,
    state: AdamState,
    feats: Tensor,
    audio: Tensor,
    targets: np.ndarray,
    lr: float,
    config: HeadConfig,
    recipe: TrainRecipe,
) -> float:
    """One forward/backward/Adam update; returns the batch loss."""
    params.zero_grad()
    preds = head_apply(feats, audio, params, config)
    loss = huber_loss(preds, targets, delta=recipe.huber_delta)
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingDivergedError(f"non-finite loss {value}")
    loss.backward()
    adam_step(params, params.grads(), state, lr,
              beta1=recipe.beta1, beta2=recipe.beta2, eps=recipe.adam_eps)
    return value


def train(
    manifest: Manifest,
    train_ids: list[str],
    val_ids: list[str],
    config: HeadConfig,
    recipe: TrainRecipe,
    checkpoint_path: str | Path | None = None,
    cache: dict[str, LayerFeatureTensor] | None = None,
) -> tuple[RunRecord, ParamSet]:
    """Train a head on frozen features; returns the run record and the
    best parameters (lowest validation RMSE, earliest tie).

    Deterministic given the recipe seed: epoch shuffles derive from
    (seed, epoch) and the last partial batch is trained, not dropped.
    Feature files and manifests are never written to.
    """
    if not train_ids or not val_ids:
        raise DomainError("train and val id lists must be non-empty")
    train_data = FeatureBatches(manifest, train_ids, config, cache)
    val_data = FeatureBatches(manifest, val_ids, config, cache)

    params = init_head(config, manifest.sfm, audio_bins=len(manifest.audiogram_frequencies))
    state = AdamState.for_params(params)
    record = RunRecord()
    best_params = params.copy()

    n_train = len(train_data)
    for epoch in range(recipe.epochs):
        lr = lr_at(recipe.schedule, epoch)
        rng = np.random.default_rng(np.random.PCG64(stable_seed(recipe.seed, "epoch", epoch)))
        order = rng.permutation(n_train)
        total, count = 0.0, 0
        for feats, audio, targets in train_data.batches(order, recipe.batch_size):
            try:
                value = train_step(params, state, feats, audio, targets, lr, config, recipe)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(f"epoch {epoch}: {exc}") from exc
            total += value * targets.size
            count += targets.size
        train_loss = total / count
        val_pred = val_data.predict(params, config)
        val_rmse = rmse(val_pred, val_data.scores)
        val_ncc = ncc(val_pred, val_data.scores)
        record.epochs.append(
            EpochStats(train_loss=train_loss, val_rmse=val_rmse, val_ncc=val_ncc, lr=lr)
        )
        if val_rmse < record.best_val_rmse:
            record.best_val_rmse = val_rmse
            record.best_epoch = epoch
            best_params = params.copy()
        log.debug("epoch %d: loss %.4f val_rmse %.4f lr %.2e", epoch, train_loss, val_rmse, lr)

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, config, best_params)
        record.checkpoint_path = str(checkpoint_path)
    return record, best_params


def evaluate(
    manifest: Manifest,
    ids: list[str],
    params: ParamSet,
    config: HeadConfig,
    cache: dict[str, LayerFeatureTensor] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Predictions and targets for `ids`, in order."""
    data = FeatureBatches(manifest, ids, config, cache)
    return data.predict(params, config), data.scores

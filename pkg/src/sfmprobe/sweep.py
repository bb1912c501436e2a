"""Experiment grids: encoder-layer sweep and embedding-dimension sweep.

Each (configuration, fold) run gets its own seed derived from the
global seed and the config identity, so parallel and serial execution
produce identical tables. Rows aggregate test-set metrics across the
three folds; checkpoints are selected on validation RMSE.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from sfmprobe.datastore.manifest import Manifest, load_manifest
from sfmprobe.datastore.splits import FoldSplit
from sfmprobe.exceptions import DomainError
from sfmprobe.heads import ALL_LAYERS, Arch, DIM_GRID, HeadConfig
from sfmprobe.metrics import MetricReport, fold_report
from sfmprobe.provenance import stable_seed
from sfmprobe.trainer import TrainRecipe, evaluate, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepRow:
    sfm: str
    arch: str
    layer_mode: int | str
    dim: int
    report: MetricReport
    fold_predictions: tuple[dict, ...] = ()

    @property
    def config_id(self) -> str:
        tag = ALL_LAYERS if self.layer_mode == ALL_LAYERS else f"k{self.layer_mode}"
        return f"sfm={self.sfm}|arch={self.arch}|layer={tag}|dim={self.dim}"

    def to_dict(self, include_predictions: bool = False) -> dict:
        doc = {
            "sfm": self.sfm,
            "arch": self.arch,
            "layer_mode": self.layer_mode,
            "dim": self.dim,
            "report": self.report.to_dict(),
        }
        if include_predictions:
            doc["fold_predictions"] = list(self.fold_predictions)
        return doc


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    seed: int
    recipe: dict

    def to_dict(self, include_predictions: bool = False) -> dict:
        return {
            "rows": [r.to_dict(include_predictions) for r in self.rows],
            "provenance": {"seed": self.seed, "recipe": self.recipe},
        }


def _recipe_summary(recipe: TrainRecipe) -> dict:
    s = recipe.schedule
    return {
        "batch_size": recipe.batch_size,
        "epochs": s.total_epochs,
        "huber_delta": recipe.huber_delta,
        "schedule": {
            "kind": s.kind,
            "base_lr": s.base_lr,
            "min_lr": s.min_lr,
            "warmup_epochs": s.warmup_epochs,
            "start_factor": s.start_factor,
        },
        "betas": [recipe.beta1, recipe.beta2],
    }


def _run_one(args: tuple) -> tuple[int, int, dict]:
    """Train/evaluate one (config, fold) job. Top-level for pickling."""
    (manifest_path, fold_doc, sfm_name, arch_value, layer_mode, dim, fold_idx,
     recipe, base_seed, row_idx, pool_factor) = args
    manifest = _manifest_cache(manifest_path)
    tag = ALL_LAYERS if layer_mode == ALL_LAYERS else f"k{layer_mode}"
    config_id = f"sfm={sfm_name}|arch={arch_value}|layer={tag}|dim={dim}"
    seed = stable_seed(base_seed, config_id, fold_idx)
    config = HeadConfig(
        arch=Arch(arch_value), layer_mode=layer_mode, embed_dim=dim,
        pool_factor=pool_factor, seed=seed,
    )
    run_recipe = replace(recipe, seed=seed)
    cache = _FEATURES.setdefault(manifest_path, {})
    record, best_params = train(
        manifest, list(fold_doc["train"]), list(fold_doc["val"]), config, run_recipe,
        cache=cache,
    )
    test_ids = list(fold_doc["test"])
    preds, targets = evaluate(manifest, test_ids, best_params, config, cache=cache)
    val_ids = list(fold_doc["val"])
    val_preds, _ = evaluate(manifest, val_ids, best_params, config, cache=cache)
    payload = {
        "test_ids": test_ids,
        "test_pred": [float(x) for x in preds],
        "test_target": [float(x) for x in targets],
        "val_ids": val_ids,
        "val_pred": [float(x) for x in val_preds],
        "best_epoch": record.best_epoch,
        "best_val_rmse": record.best_val_rmse,
    }
    return row_idx, fold_idx, payload


_MANIFESTS: dict[str, Manifest] = {}
_FEATURES: dict[str, dict] = {}


def _manifest_cache(path: str) -> Manifest:
    if path not in _MANIFESTS:
        _MANIFESTS[path] = load_manifest(path)
    return _MANIFESTS[path]


def _execute(jobs: list[tuple], workers: int) -> list[tuple[int, int, dict]]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def _assemble(
    modes: Sequence[tuple[int | str, int]],
    results: list[tuple[int, int, dict]],
    manifest: Manifest,
    arch: Arch,
    seed: int,
    recipe: TrainRecipe,
) -> SweepResult:
    by_row: dict[int, dict[int, dict]] = {}
    for row_idx, fold_idx, payload in results:
        by_row.setdefault(row_idx, {})[fold_idx] = payload
    rows = []
    for row_idx, (layer_mode, dim) in enumerate(modes):
        folds = by_row[row_idx]
        ordered = [folds[i] for i in sorted(folds)]
        pairs = [(f["test_pred"], f["test_target"]) for f in ordered]
        tag = ALL_LAYERS if layer_mode == ALL_LAYERS else f"k{layer_mode}"
        config_id = f"sfm={manifest.sfm.name}|arch={arch.value}|layer={tag}|dim={dim}"
        rows.append(
            SweepRow(
                sfm=manifest.sfm.name,
                arch=arch.value,
                layer_mode=layer_mode,
                dim=dim,
                report=fold_report(pairs, config_id=config_id),
                fold_predictions=tuple(ordered),
            )
        )
    return SweepResult(rows=tuple(rows), seed=seed, recipe=_recipe_summary(recipe))


def _jobs_for(
    manifest_path: str,
    split: FoldSplit,
    modes: Sequence[tuple[int | str, int]],
    arch: Arch,
    recipe: TrainRecipe,
    seed: int,
    sfm_name: str,
    pool_factor: int,
) -> list[tuple]:
    jobs = []
    for row_idx, (layer_mode, dim) in enumerate(modes):
        for fold_idx, fold in enumerate(split.folds):
            fold_doc = {"train": fold.train, "val": fold.val, "test": fold.test}
            jobs.append(
                (manifest_path, fold_doc, sfm_name, arch.value, layer_mode, dim,
                 fold_idx, recipe, seed, row_idx, pool_factor)
            )
    return jobs


def layer_sweep(
    manifest_path: str | Path,
    split: FoldSplit,
    arch: Arch | str,
    recipe: TrainRecipe,
    dim: int,
    seed: int = 17,
    workers: int = 1,
    pool_factor: int = 20,
) -> SweepResult:
    """Train/evaluate every single encoder layer plus the all-layers
    fusion: exactly L+1 rows, each a three-fold report."""
    arch = Arch(arch)
    manifest = _manifest_cache(str(manifest_path))
    layers = manifest.sfm.layers
    modes: list[tuple[int | str, int]] = [(k, dim) for k in range(layers)]
    modes.append((ALL_LAYERS, dim))
    jobs = _jobs_for(str(manifest_path), split, modes, arch, recipe, seed,
                     manifest.sfm.name, pool_factor)
    results = _execute(jobs, workers)
    return _assemble(modes, results, manifest, arch, seed, recipe)


def dim_sweep(
    manifest_path: str | Path,
    split: FoldSplit,
    arch: Arch | str,
    layer_mode: int | str,
    recipe: TrainRecipe,
    grid: Sequence[int] = DIM_GRID,
    seed: int = 17,
    workers: int = 1,
    pool_factor: int = 20,
) -> SweepResult:
    """Sweep the embedding dimension at a fixed layer mode; one row per
    grid entry."""
    arch = Arch(arch)
    if not grid:
        raise DomainError("empty dimension grid")
    manifest = _manifest_cache(str(manifest_path))
    modes: list[tuple[int | str, int]] = [(layer_mode, d) for d in grid]
    jobs = _jobs_for(str(manifest_path), split, modes, arch, recipe, seed,
                     manifest.sfm.name, pool_factor)
    results = _execute(jobs, workers)
    return _assemble(modes, results, manifest, arch, seed, recipe)


def best_config(result: SweepResult) -> SweepRow:
    """Row with minimal mean RMSE; ties break to higher mean NCC, then
    lexicographic config id. Stable under row permutation."""
    if not result.rows:
        raise DomainError("empty sweep result")
    return min(
        result.rows,
        key=lambda r: (r.report.mean_rmse, -r.report.mean_ncc, r.config_id),
    )


def dim_sweep_layer_mode(
    arch: Arch | str,
    wa_tgp_layers: SweepResult,
    own_layers: SweepResult | None = None,
) -> int | str:
    """Layer mode to fix during a dimension sweep.

    WA_TGP and DT use the best layer from their own layer sweep; WA_TT
    skips its own sweep and inherits WA_TGP's best layer (its optimum
    tracks WA_TGP's).
    """
    arch = Arch(arch)
    if arch is Arch.WA_TT:
        return best_config(wa_tgp_layers).layer_mode
    if own_layers is None:
        raise DomainError(f"{arch.value} needs its own layer-sweep result")
    return best_config(own_layers).layer_mode

"""Encoder-layer sweep: find the informative layer.

Trains one head per single encoder layer plus the all-layers fusion,
three folds each, and prints the resulting table. The planted layer
should win, and the learned all-layers fusion should not beat it — the
distractor layers only add estimation variance.
"""
import tempfile
from pathlib import Path

from sfmprobe.datastore import make_splits, synth_dataset
from sfmprobe.heads import Arch
from sfmprobe.numerics import ScheduleSpec
from sfmprobe.sweep import best_config, layer_sweep
from sfmprobe.trainer import TrainRecipe

workdir = Path(tempfile.mkdtemp(prefix="sfmprobe_demo_"))
result = synth_dataset(
    workdir, n_samples=300, layers=4, frames=40, channels=16,
    noise_sd=2.0, seed=31, informative_layer=2, n_listeners=10,
)
split = make_splits(result.manifest.samples, seed=17)
recipe = TrainRecipe(
    schedule=ScheduleSpec(kind="cosine", base_lr=3e-2, min_lr=1e-3, total_epochs=50),
    batch_size=64,
)

print(f"planted informative layer: {result.informative_layer}")
print("sweeping 4 single layers + all-layers fusion, 3 folds each...")
sweep = layer_sweep(str(result.manifest_path), split, Arch.WA_TGP, recipe,
                    dim=12, seed=17)

print()
print(f"{'layer':>6}  {'RMSE':>7}  {'NCC':>6}   per-fold RMSE")
for row in sweep.rows:
    folds = ", ".join(f"{v:.2f}" for v in row.report.fold_rmse)
    print(f"{str(row.layer_mode):>6}  {row.report.mean_rmse:>7.3f}  "
          f"{row.report.mean_ncc:>6.3f}   [{folds}]")

best = best_config(sweep)
print()
print(f"best configuration: layer={best.layer_mode} "
      f"(mean RMSE {best.report.mean_rmse:.3f})")

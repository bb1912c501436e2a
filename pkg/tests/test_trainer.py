"""Training loop: recipe defaults, determinism, selection, checkpoint
reload fidelity, and gradient-flow sanity."""
import numpy as np
import pytest

from sfmprobe.datastore import load_manifest, synth_dataset
from sfmprobe.exceptions import DomainError
from sfmprobe.heads import Arch, HeadConfig, load_checkpoint
from sfmprobe.numerics import AdamState, ScheduleSpec
from sfmprobe.trainer import (
    EpochStats,
    FeatureBatches,
    RunRecord,
    TrainRecipe,
    default_recipe,
    evaluate,
    select_checkpoint,
    train,
    train_step,
)
from sfmprobe.heads import init_head
from sfmprobe.metrics import rmse


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    result = synth_dataset(out, n_samples=80, layers=2, frames=30, channels=6,
                           noise_sd=0.5, seed=21, informative_layer=1, n_listeners=8)
    return result


def _fast_recipe(epochs=15, lr=3e-2, seed=3):
    return TrainRecipe(
        schedule=ScheduleSpec(kind="cosine", base_lr=lr, min_lr=lr / 100,
                              total_epochs=epochs),
        batch_size=32,
        seed=seed,
    )


# -- recipe ------------------------------------------------------------------------


def test_default_recipe_wa_tgp_is_pure_cosine():
    recipe = default_recipe(Arch.WA_TGP)
    assert recipe.schedule.kind == "cosine"
    assert recipe.schedule.base_lr == 1e-4
    assert recipe.schedule.min_lr == 1e-6
    assert recipe.schedule.total_epochs == 50
    assert recipe.batch_size == 128


def test_default_recipe_transformer_heads_have_warmup():
    for arch in (Arch.WA_TT, Arch.DT):
        recipe = default_recipe(arch)
        assert recipe.schedule.kind == "warmup-cosine"
        assert recipe.schedule.warmup_epochs == 10
        assert recipe.schedule.start_factor == 0.1
        assert recipe.schedule.base_lr == 3e-5


def test_default_recipe_betas_for_all_archs():
    for arch in Arch:
        recipe = default_recipe(arch)
        assert (recipe.beta1, recipe.beta2) == (0.9, 0.98)


# -- selection ----------------------------------------------------------------------


def _record(vals):
    return RunRecord(
        epochs=[EpochStats(train_loss=0.0, val_rmse=v, val_ncc=0.5, lr=1e-4) for v in vals],
        best_epoch=int(np.argmin(vals)),
        best_val_rmse=min(vals),
    )


def test_select_checkpoint_argmin_and_ties():
    assert select_checkpoint(_record([30.0, 25.0, 26.0])) == 1
    assert select_checkpoint(_record([5.0, 4.0, 4.0])) == 1
    assert select_checkpoint(_record([5.0, 4.0, 3.0])) == 2
    assert select_checkpoint(_record([7.5])) == 0


def test_select_checkpoint_empty_record_rejected():
    with pytest.raises(DomainError):
        select_checkpoint(RunRecord())


# -- training -----------------------------------------------------------------------


def test_train_is_deterministic(dataset):
    manifest = dataset.manifest
    ids = [s.sample_id for s in manifest.samples]
    cfg = HeadConfig(arch=Arch.WA_TGP, layer_mode=1, embed_dim=6, seed=7)
    recipe = _fast_recipe(epochs=6)
    rec_a, params_a = train(manifest, ids[:60], ids[60:], cfg, recipe)
    rec_b, params_b = train(manifest, ids[:60], ids[60:], cfg, recipe)
    assert rec_a.to_dict() == rec_b.to_dict()
    assert params_a.state_hash() == params_b.state_hash()


def test_train_tracks_best_epoch_as_argmin(dataset):
    manifest = dataset.manifest
    ids = [s.sample_id for s in manifest.samples]
    cfg = HeadConfig(arch=Arch.WA_TGP, layer_mode=1, embed_dim=6, seed=7)
    record, _ = train(manifest, ids[:60], ids[60:], cfg, _fast_recipe(epochs=8))
    assert record.best_epoch == select_checkpoint(record)
    assert record.best_val_rmse == min(e.val_rmse for e in record.epochs)
    assert len(record.epochs) == 8


def test_checkpoint_reload_reproduces_val_rmse(dataset, tmp_path):
    manifest = dataset.manifest
    ids = [s.sample_id for s in manifest.samples]
    cfg = HeadConfig(arch=Arch.WA_TT, layer_mode=1, embed_dim=8, pool_factor=10,
                     depth=1, n_heads=2, seed=7)
    ckpt = tmp_path / "best.ckpt"
    record, _ = train(manifest, ids[:60], ids[60:], cfg, _fast_recipe(epochs=5),
                      checkpoint_path=ckpt)
    cfg2, params2 = load_checkpoint(ckpt)
    preds, targets = evaluate(manifest, ids[60:], params2, cfg2)
    assert rmse(preds, targets) == pytest.approx(record.best_val_rmse, abs=1e-9)


def test_training_reads_but_never_writes_data(dataset):
    manifest_path = dataset.manifest_path
    before = {
        p: p.read_bytes()
        for p in sorted(manifest_path.parent.rglob("*"))
        if p.is_file()
    }
    manifest = load_manifest(manifest_path)
    ids = [s.sample_id for s in manifest.samples]
    cfg = HeadConfig(arch=Arch.WA_TGP, layer_mode=1, embed_dim=6, seed=7)
    train(manifest, ids[:60], ids[60:], cfg, _fast_recipe(epochs=3))
    after = {
        p: p.read_bytes()
        for p in sorted(manifest_path.parent.rglob("*"))
        if p.is_file()
    }
    assert before == after


def test_loss_strictly_decreases_over_first_five_steps_on_fixed_batch(dataset):
    # gradient-flow sanity at the published base rate: small steps on a
    # fixed batch must descend monotonically from a fresh head
    manifest = dataset.manifest
    ids = [s.sample_id for s in manifest.samples]
    for arch in Arch:
        cfg = HeadConfig(arch=arch, layer_mode=1, embed_dim=8, pool_factor=10,
                         depth=1, n_heads=2, seed=11)
        recipe = default_recipe(arch, seed=11)
        params = init_head(cfg, manifest.sfm, audio_bins=len(manifest.audiogram_frequencies))
        state = AdamState.for_params(params)
        data = FeatureBatches(manifest, ids[:32], cfg)
        order = np.arange(32)
        (feats, audio, targets) = next(data.batches(order, 32))
        losses = []
        for _ in range(6):
            losses.append(
                train_step(params, state, feats, audio, targets,
                           recipe.schedule.base_lr, cfg, recipe)
            )
        diffs = np.diff(losses)
        assert (diffs < 0).all(), f"{arch}: losses {losses}"


def test_overfit_noise_free_subset(tmp_path):
    result = synth_dataset(tmp_path, n_samples=40, layers=2, frames=25, channels=6,
                           noise_sd=0.0, seed=31, informative_layer=0, n_listeners=5)
    manifest = result.manifest
    ids = [s.sample_id for s in manifest.samples]
    cfg = HeadConfig(arch=Arch.WA_TGP, layer_mode=0, embed_dim=8, seed=1)
    recipe = TrainRecipe(
        schedule=ScheduleSpec(kind="cosine", base_lr=3e-2, min_lr=3e-4,
                              total_epochs=150),
        batch_size=128,
        seed=1,
    )
    _, best = train(manifest, ids[:32], ids[32:], cfg, recipe)
    preds, targets = evaluate(manifest, ids[:32], best, cfg)
    assert rmse(preds, targets) < 2.0


def test_train_rejects_empty_folds(dataset):
    manifest = dataset.manifest
    ids = [s.sample_id for s in manifest.samples]
    cfg = HeadConfig(arch=Arch.WA_TGP, layer_mode=1, embed_dim=6, seed=7)
    with pytest.raises(DomainError):
        train(manifest, [], ids[60:], cfg, _fast_recipe())
    with pytest.raises(DomainError):
        train(manifest, ids[:60], [], cfg, _fast_recipe())


def test_run_record_round_trips():
    rec = _record([3.0, 2.5, 2.7])
    rec.checkpoint_path = "x/y.ckpt"
    assert RunRecord.from_dict(rec.to_dict()).to_dict() == rec.to_dict()

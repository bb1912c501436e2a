"""Command-line entry point for the full experiment lifecycle.

Subcommands: split, train, sweep-layers, sweep-dims, eval, ensemble,
report. Every artifact embeds the producing command line, the seed, and
content hashes of its inputs, and re-running the same command
reproduces the artifact byte-for-byte. Nothing is written outside
--out.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from sfmprobe import ensemble as ens
from sfmprobe.datastore import load_manifest, make_splits, read_split
from sfmprobe.datastore.splits import split_to_dict
from sfmprobe.exceptions import SfmProbeError
from sfmprobe.heads import ALL_LAYERS, Arch, DIM_GRID, HeadConfig, load_checkpoint
from sfmprobe.metrics import ncc, rmse
from sfmprobe.numerics import ScheduleSpec
from sfmprobe.provenance import content_hash, read_json, write_json_artifact
from sfmprobe.sweep import SweepResult, best_config, dim_sweep, layer_sweep
from sfmprobe.trainer import TrainRecipe, default_recipe, evaluate, train

log = logging.getLogger("sfmprobe")

DEFAULT_SEED = 17


class UsageError(Exception):
    """Bad invocation detected before any work started."""


def _parse_arch(value: str) -> Arch:
    normalized = value.strip().lower().replace("-", "_")
    try:
        return Arch(normalized)
    except ValueError:
        raise UsageError(
            f"unknown --arch {value!r}; choose from wa-tgp, wa-tt, dt"
        ) from None


def _parse_layer(value: str) -> int | str:
    if value.strip().lower() == ALL_LAYERS:
        return ALL_LAYERS
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"--layer must be an index or 'all', got {value!r}") from None


def _require_file(path: str | None, flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: no such file: {p}")
    return p


def _recipe_from_args(args, arch: Arch) -> TrainRecipe:
    recipe = default_recipe(arch, seed=args.seed)
    if getattr(args, "recipe", None):
        doc = read_json(_require_file(args.recipe, "--recipe"))
        sched_doc = doc.get("schedule", {})
        schedule = ScheduleSpec(
            kind=sched_doc.get("kind", recipe.schedule.kind),
            base_lr=sched_doc.get("base_lr", recipe.schedule.base_lr),
            min_lr=sched_doc.get("min_lr", recipe.schedule.min_lr),
            total_epochs=sched_doc.get("total_epochs", recipe.schedule.total_epochs),
            warmup_epochs=sched_doc.get("warmup_epochs", recipe.schedule.warmup_epochs),
            start_factor=sched_doc.get("start_factor", recipe.schedule.start_factor),
        )
        recipe = TrainRecipe(
            schedule=schedule,
            batch_size=doc.get("batch_size", recipe.batch_size),
            huber_delta=doc.get("huber_delta", recipe.huber_delta),
            beta1=doc.get("beta1", recipe.beta1),
            beta2=doc.get("beta2", recipe.beta2),
            seed=args.seed,
        )
    return recipe


def _provenance(args, argv: list[str], inputs: dict[str, str]) -> dict:
    return {
        "command": argv,
        "seed": getattr(args, "seed", None),
        "inputs": {flag: content_hash(path) for flag, path in inputs.items()},
    }


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommand implementations ------------------------------------------------


def _cmd_split(args, argv) -> int:
    manifest_path = _require_file(args.manifest, "--manifest")
    out = _out_dir(args)
    manifest = load_manifest(manifest_path, check_features=False)
    split = make_splits(manifest.samples, seed=args.seed)
    doc = split_to_dict(split)
    doc["provenance"] = _provenance(args, argv, {"--manifest": manifest_path})
    write_json_artifact(doc, out / "split.json")
    log.info("wrote %s", out / "split.json")
    return 0


def _cmd_train(args, argv) -> int:
    manifest_path = _require_file(args.manifest, "--manifest")
    split_path = _require_file(args.split, "--split")
    out = _out_dir(args)
    manifest = load_manifest(manifest_path)
    split = read_split(split_path)
    if not (0 <= args.fold < len(split.folds)):
        raise UsageError(f"--fold must be in [0, {len(split.folds)})")
    arch = _parse_arch(args.arch)
    layer_mode = _parse_layer(args.layer)
    recipe = _recipe_from_args(args, arch)
    config = HeadConfig(
        arch=arch, layer_mode=layer_mode, embed_dim=args.dim,
        pool_factor=args.pool_factor, seed=args.seed,
    )
    fold = split.folds[args.fold]
    checkpoint = out / "head.ckpt"
    record, best_params = train(
        manifest, list(fold.train), list(fold.val), config, recipe,
        checkpoint_path=checkpoint,
    )
    test_pred, test_target = evaluate(manifest, list(fold.test), best_params, config)
    doc = {
        "config_id": config.identity(manifest.sfm.name),
        "fold": args.fold,
        "run_record": record.to_dict(),
        "test": {
            "ids": list(fold.test),
            "pred": [float(x) for x in test_pred],
            "target": [float(x) for x in test_target],
            "rmse": rmse(test_pred, test_target),
            "ncc": ncc(test_pred, test_target),
        },
        "provenance": _provenance(
            args, argv, {"--manifest": manifest_path, "--split": split_path}
        ),
    }
    write_json_artifact(doc, out / "train_run.json")
    log.info("fold %d test rmse %.3f", args.fold, doc["test"]["rmse"])
    return 0


def _sweep_doc(result: SweepResult, args, argv, inputs) -> dict:
    doc = result.to_dict(include_predictions=True)
    best = best_config(result)
    doc["best_config"] = {
        "config_id": best.config_id,
        "layer_mode": best.layer_mode,
        "dim": best.dim,
        "mean_rmse": best.report.mean_rmse,
        "mean_ncc": best.report.mean_ncc,
    }
    doc["provenance"] = _provenance(args, argv, inputs)
    return doc


def _cmd_sweep_layers(args, argv) -> int:
    manifest_path = _require_file(args.manifest, "--manifest")
    split_path = _require_file(args.split, "--split")
    out = _out_dir(args)
    split = read_split(split_path)
    arch = _parse_arch(args.arch)
    recipe = _recipe_from_args(args, arch)
    result = layer_sweep(
        str(manifest_path), split, arch, recipe, dim=args.dim,
        seed=args.seed, workers=args.workers, pool_factor=args.pool_factor,
    )
    doc = _sweep_doc(result, args, argv,
                     {"--manifest": manifest_path, "--split": split_path})
    write_json_artifact(doc, out / "sweep_layers.json")
    (out / "sweep_layers.txt").write_text(format_sweep_table(result))
    log.info("layer sweep: best %s", doc["best_config"]["config_id"])
    return 0


def _cmd_sweep_dims(args, argv) -> int:
    manifest_path = _require_file(args.manifest, "--manifest")
    split_path = _require_file(args.split, "--split")
    out = _out_dir(args)
    split = read_split(split_path)
    arch = _parse_arch(args.arch)
    recipe = _recipe_from_args(args, arch)
    grid = tuple(int(d) for d in args.grid.split(",")) if args.grid else DIM_GRID
    result = dim_sweep(
        str(manifest_path), split, arch, _parse_layer(args.layer), recipe,
        grid=grid, seed=args.seed, workers=args.workers, pool_factor=args.pool_factor,
    )
    doc = _sweep_doc(result, args, argv,
                     {"--manifest": manifest_path, "--split": split_path})
    write_json_artifact(doc, out / "sweep_dims.json")
    (out / "sweep_dims.txt").write_text(format_sweep_table(result))
    log.info("dim sweep: best %s", doc["best_config"]["config_id"])
    return 0


def _cmd_eval(args, argv) -> int:
    manifest_path = _require_file(args.manifest, "--manifest")
    split_path = _require_file(args.split, "--split")
    ckpt_path = _require_file(args.checkpoint, "--checkpoint")
    out = _out_dir(args)
    manifest = load_manifest(manifest_path)
    split = read_split(split_path)
    if not (0 <= args.fold < len(split.folds)):
        raise UsageError(f"--fold must be in [0, {len(split.folds)})")
    config, params = load_checkpoint(ckpt_path)
    fold = split.folds[args.fold]
    config_id = config.identity(manifest.sfm.name)
    doc = {
        "config_id": config_id,
        "member": args.member or config_id,
        "fold": args.fold,
    }
    for part in ("val", "test"):
        ids = list(fold.part(part))
        pred, target = evaluate(manifest, ids, params, config)
        doc[part] = {
            "ids": ids,
            "pred": [float(x) for x in pred],
            "target": [float(x) for x in target],
            "rmse": rmse(pred, target),
            "ncc": ncc(pred, target),
        }
    doc["provenance"] = _provenance(
        args, argv,
        {"--manifest": manifest_path, "--split": split_path, "--checkpoint": ckpt_path},
    )
    write_json_artifact(doc, out / "eval.json")
    return 0


def _member_tables(member_paths: list[Path]) -> tuple[dict, dict, dict, dict]:
    """Load per-member prediction files into val/test tables."""
    val_preds: dict[str, dict[str, float]] = {}
    test_preds: dict[str, dict[str, float]] = {}
    val_targets: dict[str, float] = {}
    test_targets: dict[str, float] = {}
    for path in member_paths:
        doc = read_json(path)
        member = doc["member"]
        if member in val_preds:
            raise UsageError(f"duplicate member id {member!r}")
        val_preds[member] = dict(zip(doc["val"]["ids"], doc["val"]["pred"]))
        test_preds[member] = dict(zip(doc["test"]["ids"], doc["test"]["pred"]))
        val_targets.update(zip(doc["val"]["ids"], doc["val"]["target"]))
        test_targets.update(zip(doc["test"]["ids"], doc["test"]["target"]))
    return val_preds, test_preds, val_targets, test_targets


def _cmd_ensemble(args, argv) -> int:
    member_paths = [_require_file(p, "--members") for p in args.members]
    out = _out_dir(args)
    val_preds, test_preds, val_targets, test_targets = _member_tables(member_paths)
    members = sorted(val_preds)
    if args.k > len(members):
        raise UsageError(f"--k {args.k} exceeds member count {len(members)}")
    combos = ens.enumerate_combinations(members, args.k)
    fitted = []
    for combo in combos:
        val_subset = ens.MemberPredictions({m: val_preds[m] for m in combo})
        model = ens.fit_ensemble(val_subset, val_targets,
                                 steps=args.fit_steps, lr=args.fit_lr)
        test_subset = ens.MemberPredictions({m: test_preds[m] for m in combo})
        test_pred = ens.ensemble_predict(model, test_subset)
        y = test_subset.aligned_targets(test_targets)
        val_pred = ens.ensemble_predict(model, val_subset)
        yv = val_subset.aligned_targets(val_targets)
        fitted.append(
            {
                "members": list(combo),
                "model": model.to_dict(),
                "val_rmse": rmse(val_pred, yv),
                "test_rmse": rmse(test_pred, y),
                "test_ncc": ncc(test_pred, y),
            }
        )
    fitted.sort(key=lambda r: (r["test_rmse"], tuple(r["members"])))
    for rank, row in enumerate(fitted, start=1):
        row["rank"] = rank
    models = [
        ens.EnsembleModel(tuple(r["members"]), tuple(r["model"]["logits"]))
        for r in fitted
    ]
    member_rows = [
        {
            "member": m,
            "test_rmse": rmse(
                np.array([test_preds[m][sid] for sid in sorted(test_targets)]),
                np.array([test_targets[sid] for sid in sorted(test_targets)]),
            ),
            "test_ncc": ncc(
                np.array([test_preds[m][sid] for sid in sorted(test_targets)]),
                np.array([test_targets[sid] for sid in sorted(test_targets)]),
            ),
        }
        for m in members
    ]
    member_rows.sort(key=lambda r: (r["test_rmse"], r["member"]))
    for rank, row in enumerate(member_rows, start=1):
        row["rank"] = rank
    doc = {
        "k": args.k,
        "members": member_rows,
        "ensembles": fitted,
        "weight_distribution": ens.weight_distribution(models),
        "provenance": _provenance(
            args, argv, {f"--members[{i}]": p for i, p in enumerate(member_paths)}
        ),
    }
    write_json_artifact(doc, out / "ensemble.json")
    log.info("fitted %d ensembles of k=%d", len(fitted), args.k)
    return 0


def _cmd_report(args, argv) -> int:
    out = _out_dir(args)
    inputs = {}
    lines = []
    doc: dict = {}
    if args.sweep:
        grid_rows = []
        for i, path in enumerate(args.sweep):
            sweep_path = _require_file(path, "--sweep")
            inputs[f"--sweep[{i}]"] = sweep_path
            sweep_doc = read_json(sweep_path)
            lines.append(format_sweep_doc_table(sweep_doc))
            row = dim_grid_row(sweep_doc)
            if row is not None:
                grid_rows.append(row)
            doc.setdefault("sweeps", []).append(
                {"path": str(sweep_path), "best_config": sweep_doc.get("best_config")}
            )
        if grid_rows:
            grid_rows.sort()
            lines.append(format_dim_grid_table(grid_rows))
    if args.ensemble:
        ens_path = _require_file(args.ensemble, "--ensemble")
        inputs["--ensemble"] = ens_path
        ens_doc = read_json(ens_path)
        lines.append(format_member_table(ens_doc["members"]))
        lines.append(format_ensemble_table(ens_doc["ensembles"]))
        doc["ensemble"] = {
            "path": str(ens_path),
            "best": ens_doc["ensembles"][0] if ens_doc["ensembles"] else None,
        }
    if not inputs:
        raise UsageError("report needs --sweep and/or --ensemble inputs")
    doc["provenance"] = _provenance(args, argv, inputs)
    write_json_artifact(doc, out / "report.json")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return 0


# -- plain-text tables ----------------------------------------------------------


def _fmt_row(cells: list[str], widths: list[int]) -> str:
    return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()


def _render_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = [_fmt_row(header, widths), _fmt_row(["-" * w for w in widths], widths)]
    lines.extend(_fmt_row(r, widths) for r in rows)
    return "\n".join(lines) + "\n"


def format_sweep_table(result: SweepResult) -> str:
    rows = [
        [r.config_id, f"{r.report.mean_rmse:.3f}", f"{r.report.mean_ncc:.3f}"]
        for r in result.rows
    ]
    return _render_table(["config", "RMSE", "NCC"], rows)


def format_sweep_doc_table(doc: dict) -> str:
    rows = [
        [
            f"sfm={r['sfm']}|arch={r['arch']}|layer={r['layer_mode']}|dim={r['dim']}",
            f"{r['report']['mean_rmse']:.3f}",
            f"{r['report']['mean_ncc']:.3f}",
        ]
        for r in doc["rows"]
    ]
    return _render_table(["config", "RMSE", "NCC"], rows)


def dim_grid_row(doc: dict) -> list[str] | None:
    """Collapse a dimension sweep into one grid row with slash-separated
    per-dimension scores; None when the doc is not a dimension sweep."""
    rows = doc["rows"]
    dims = [r["dim"] for r in rows]
    heads = {(r["sfm"], r["arch"], str(r["layer_mode"])) for r in rows}
    if len(set(dims)) < 2 or len(heads) != 1:
        return None
    sfm, arch, layer = next(iter(heads))
    return [
        sfm,
        arch,
        layer,
        ",".join(str(d) for d in dims),
        "/".join(f"{r['report']['mean_rmse']:.2f}" for r in rows),
        "/".join(f"{r['report']['mean_ncc']:.3f}" for r in rows),
    ]


def format_dim_grid_table(grid_rows: list[list[str]]) -> str:
    return _render_table(["SFM", "arch", "layer", "dims", "RMSE", "NCC"], grid_rows)


def format_member_table(members: list[dict]) -> str:
    rows = [
        [str(m["rank"]), m["member"], f"{m['test_rmse']:.3f}", f"{m['test_ncc']:.3f}"]
        for m in members
    ]
    return _render_table(["rank", "member", "RMSE", "NCC"], rows)


def format_ensemble_table(ensembles: list[dict]) -> str:
    rows = [
        [
            str(e["rank"]),
            "(" + ", ".join(e["members"]) + ")",
            f"{e['test_rmse']:.3f}",
            f"{e['test_ncc']:.3f}",
        ]
        for e in ensembles
    ]
    return _render_table(["rank", "combination", "RMSE", "NCC"], rows)


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfmprobe",
        description="Train/evaluate intelligibility prediction heads on frozen "
                    "speech-foundation-model features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True, split=False):
        if manifest:
            p.add_argument("--manifest", help="dataset manifest JSON")
        if split:
            p.add_argument("--split", help="split JSON from the split subcommand")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--workers", type=int,
                       default=int(os.environ.get("SFMPROBE_WORKERS", "1")))

    p = sub.add_parser("split", help="listener-disjoint three-fold split")
    common(p)

    p = sub.add_parser("train", help="train one head configuration")
    common(p, split=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--layer", default=ALL_LAYERS)
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--pool-factor", type=int, default=20, dest="pool_factor")
    p.add_argument("--recipe", help="JSON file overriding the default recipe")

    p = sub.add_parser("sweep-layers", help="sweep single layers plus all-layers")
    common(p, split=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--pool-factor", type=int, default=20, dest="pool_factor")
    p.add_argument("--recipe", help="JSON file overriding the default recipe")

    p = sub.add_parser("sweep-dims", help="sweep embedding dimensions")
    common(p, split=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--layer", default=ALL_LAYERS)
    p.add_argument("--grid", help="comma-separated dims (default 192,384,768,1536)")
    p.add_argument("--pool-factor", type=int, default=20, dest="pool_factor")
    p.add_argument("--recipe", help="JSON file overriding the default recipe")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a fold")
    common(p, split=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--member", help="member id for downstream ensembling "
                                    "(default: the config identity)")

    p = sub.add_parser("ensemble", help="fit k-of-n ensembles from member predictions")
    common(p, manifest=False)
    p.add_argument("--members", nargs="+", required=True,
                   help="member prediction JSON files")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--fit-steps", type=int, default=ens.FIT_STEPS, dest="fit_steps")
    p.add_argument("--fit-lr", type=float, default=ens.FIT_LR, dest="fit_lr")

    p = sub.add_parser("report", help="render sweep/ensemble artifacts as tables")
    common(p, manifest=False)
    p.add_argument("--sweep", nargs="*", help="sweep result JSON files")
    p.add_argument("--ensemble", help="ensemble result JSON file")

    return parser


_COMMANDS = {
    "split": _cmd_split,
    "train": _cmd_train,
    "sweep-layers": _cmd_sweep_layers,
    "sweep-dims": _cmd_sweep_dims,
    "eval": _cmd_eval,
    "ensemble": _cmd_ensemble,
    "report": _cmd_report,
}


def run(argv: list[str]) -> int:
    """Parse and execute; returns the process exit code."""
    logging.basicConfig(
        level=os.environ.get("SFMPROBE_LOG", "INFO"),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SfmProbeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

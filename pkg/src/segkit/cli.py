"""Command-line surface for the toolkit.

Subcommands: synth, stats, assign, train, predict, filter, eval,
gradcheck, report. Tunable defaults follow the reference configuration:
32x32 grid, prediction-IoU threshold 0.3, box IoU cutoff 0.3, minimum
region area 150, learning rate 1e-3, 200 epochs.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np
from PIL import Image

from . import confidence, grid as gridmod, losses, metrics, pipeline, postprocess
from .data import dataset_stats, load_manifest, save_manifest
from .errors import SegkitError
from .head import HeadParams, MaskCandidate, PointPromptSegmenter
from .postprocess import FilterConfig
from .synth import SynthConfig, synth_generate
from .tensorio import atomic_write_text

GRADCHECK_TOLERANCE = 1e-6


def _threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("SEGKIT_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _write_run_manifest(out_dir: str, command: str, config: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    doc = {"command": command, "config": config}
    atomic_write_text(
        os.path.join(out_dir, "run-manifest.json"),
        json.dumps(doc, indent=2, sort_keys=True) + "\n",
    )


def _feature_provider(manifest, features_dir, feature_size=None):
    if features_dir:
        return confidence.FeatDirProvider(features_dir, manifest)
    return confidence.ToyFeatureProvider(manifest, feature_size)


def _grid_for_manifest(manifest, per_side):
    if not manifest.images:
        raise SegkitError("manifest has no images")
    dims = {(rec.frame.width, rec.frame.height) for rec in manifest.images}
    if len(dims) != 1:
        raise SegkitError(f"images have mixed dimensions: {sorted(dims)}")
    (w, h) = dims.pop()
    return gridmod.build_grid(per_side, w, h)


@click.group()
def main():
    """Everything-mode segmentation toolkit."""


@main.command()
@click.option("--out", required=True, type=click.Path(), help="output directory")
@click.option("--images", "num_images", default=8, show_default=True)
@click.option("--canvas", default=64, show_default=True)
@click.option("--classes", "num_classes", default=8, show_default=True)
@click.option("--shapes-min", default=2, show_default=True)
@click.option("--shapes-max", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out, num_images, canvas, num_classes, shapes_min, shapes_max, seed):
    """Generate a synthetic shape dataset and write its manifest."""
    config = SynthConfig(num_images, canvas, num_classes, shapes_min, shapes_max, seed)
    manifest = synth_generate(config)
    save_manifest(manifest, os.path.join(out, "manifest.json"))
    _write_run_manifest(out, "synth", vars(config))
    click.echo(f"wrote {manifest.image_count} images, {manifest.mask_count} masks to {out}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="emit JSON instead of a table")
def stats(manifest_path, as_json):
    """Dataset statistics: per-class, per-category, and per-size counts."""
    report = dataset_stats(load_manifest(manifest_path))
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2))
    else:
        click.echo(report.render())


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="output directory")
@click.option("--grid", "per_side", default=32, show_default=True)
@click.option("--features", "features_dir", type=click.Path(exists=True), default=None)
def assign(manifest_path, out, per_side, features_dir):
    """Assign every ground-truth mask to its nearest grid point."""
    manifest = load_manifest(manifest_path)
    provider = _feature_provider(manifest, features_dir)
    point_grid = _grid_for_manifest(manifest, per_side)
    assignments = gridmod.assign_dataset(manifest, provider, point_grid)
    os.makedirs(out, exist_ok=True)
    gridmod.save_assignments(assignments, os.path.join(out, "assignments.json"))
    _write_run_manifest(
        out, "assign", {"manifest": manifest_path, "grid": per_side, "features": features_dir}
    )
    click.echo(f"wrote {len(assignments)} assignments to {out}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--assignments", "assignments_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="output directory")
@click.option("--features", "features_dir", type=click.Path(exists=True), default=None)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--epochs", default=200, show_default=True)
@click.option("--weight-decay", default=0.01, show_default=True)
@click.option("--loss-weights", nargs=3, type=float, default=(1.0, 1.0, 1.0), show_default=True)
@click.option("--seed", default=0, show_default=True)
def train(manifest_path, assignments_path, out, features_dir, lr, epochs, weight_decay, loss_weights, seed):
    """Fine-tune the toy head on assigned grid-point prompts."""
    manifest = load_manifest(manifest_path)
    assignments = gridmod.load_assignments(assignments_path)
    provider = _feature_provider(manifest, features_dir)
    model = PointPromptSegmenter(
        learning_rate=lr,
        epochs=epochs,
        weight_decay=weight_decay,
        loss_weights=tuple(loss_weights),
        seed=seed,
    )
    model.fit(manifest, assignments, provider)
    os.makedirs(out, exist_ok=True)
    model.params_.save(os.path.join(out, "checkpoint.fsec"))
    model.train_log_.save(os.path.join(out, "train_log.csv"))
    _write_run_manifest(out, "train", {
        "manifest": manifest_path, "assignments": assignments_path,
        "features": features_dir, "lr": lr, "epochs": epochs,
        "weight_decay": weight_decay, "loss_weights": list(loss_weights), "seed": seed,
    })
    click.echo(
        f"trained {epochs} epochs: loss {model.train_log_.initial_loss:.4f} "
        f"-> {model.train_log_.final_loss:.4f}"
    )


def _run_everything(manifest_path, checkpoint, features_dir, per_side, filter_config, threads):
    if not os.path.exists(checkpoint):
        raise SegkitError(f"checkpoint does not exist: {checkpoint}")
    manifest = load_manifest(manifest_path)
    params = HeadParams.load(checkpoint)
    provider = _feature_provider(manifest, features_dir)
    point_grid = _grid_for_manifest(manifest, per_side)
    result = pipeline.run_everything_mode(
        manifest, params, provider, point_grid, filter_config, threads=threads
    )
    return manifest, result


_filter_options = [
    click.option("--pred-iou", default=0.3, show_default=True),
    click.option("--box-cutoff", default=0.3, show_default=True),
    click.option("--min-area", default=150, show_default=True),
]


def _with_filter_options(fn):
    for opt in reversed(_filter_options):
        fn = opt(fn)
    return fn


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--features", "features_dir", type=click.Path(exists=True), default=None)
@click.option("--grid", "per_side", default=32, show_default=True)
@_with_filter_options
@click.option("--threads", type=int, default=None)
def predict(manifest_path, checkpoint, out, features_dir, per_side, pred_iou, box_cutoff, min_area, threads):
    """Everything-mode prediction: filtered survivor masks plus reports."""
    config = FilterConfig(pred_iou, box_cutoff, min_area)
    manifest, result = _run_everything(
        manifest_path, checkpoint, features_dir, per_side, config, _threads(threads)
    )
    os.makedirs(out, exist_ok=True)
    pipeline.save_survivors(result, out, manifest.class_table)
    postprocess.save_count_report(
        result.counts,
        os.path.join(out, "counts.json"),
        os.path.join(out, "counts.txt"),
    )
    metrics.save_report(
        result.report,
        os.path.join(out, "eval_report.json"),
        os.path.join(out, "eval_report.txt"),
    )
    _write_run_manifest(out, "predict", {
        "manifest": manifest_path, "checkpoint": checkpoint,
        "features": features_dir, "grid": per_side,
        "pred_iou_threshold": pred_iou, "box_iou_cutoff": box_cutoff,
        "min_region_area": min_area,
    })
    click.echo(
        f"{result.counts.pipelines['vanilla']} candidates -> "
        f"{result.counts.pipelines['filtered']} survivors; mIoU {result.report.miou:.4f}"
    )


@main.command("filter")
@click.option("--survivors", "survivors_dir", required=True, type=click.Path(exists=True),
              help="masks directory of a previous predict run")
@click.option("--out", required=True, type=click.Path())
@_with_filter_options
def filter_cmd(survivors_dir, out, pred_iou, box_cutoff, min_area):
    """Re-filter a previous run's survivor masks with new settings."""
    config = FilterConfig(pred_iou, box_cutoff, min_area)
    results = {}
    for entry in sorted(os.listdir(survivors_dir)):
        if not entry.endswith(".json"):
            continue
        with open(os.path.join(survivors_dir, entry), "r", encoding="utf-8") as fh:
            index = json.load(fh)
        candidates = []
        for row in index["masks"]:
            mask = np.asarray(Image.open(os.path.join(survivors_dir, row["file"]))) > 0
            logits = np.where(mask, 1.0, -1.0)
            candidates.append(MaskCandidate(
                mask, logits, row["predicted_iou"], tuple(row["prompt_point"])
            ))
        results[index["image_id"]] = postprocess.run_pipeline(candidates, config)
    report = postprocess.count_masks(results)
    os.makedirs(out, exist_ok=True)
    postprocess.save_count_report(
        report, os.path.join(out, "counts.json"), os.path.join(out, "counts.txt")
    )
    _write_run_manifest(out, "filter", {
        "survivors": survivors_dir, "pred_iou_threshold": pred_iou,
        "box_iou_cutoff": box_cutoff, "min_region_area": min_area,
    })
    click.echo(f"{report.total} masks survive re-filtering")


@main.command("eval")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--features", "features_dir", type=click.Path(exists=True), default=None)
@click.option("--grid", "per_side", default=32, show_default=True)
@click.option("--baseline", "baseline_path", type=click.Path(exists=True), default=None,
              help="baseline eval_report.json for delta columns")
@click.option("--threads", type=int, default=None)
def eval_cmd(manifest_path, checkpoint, out, features_dir, per_side, baseline_path, threads):
    """Single-point evaluation protocol: per-class IoU/Acc and mIoU/mAcc."""
    manifest, result = _run_everything(
        manifest_path, checkpoint, features_dir, per_side, FilterConfig(), _threads(threads)
    )
    baseline = None
    if baseline_path:
        with open(baseline_path, "r", encoding="utf-8") as fh:
            baseline = metrics.EvalReport.from_json(json.load(fh))
    os.makedirs(out, exist_ok=True)
    metrics.save_report(
        result.report,
        os.path.join(out, "eval_report.json"),
        os.path.join(out, "eval_report.txt"),
        baseline=baseline,
    )
    _write_run_manifest(out, "eval", {
        "manifest": manifest_path, "checkpoint": checkpoint,
        "features": features_dir, "grid": per_side, "baseline": baseline_path,
    })
    click.echo(metrics.render_report(result.report, baseline))


@main.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--trials", default=10, show_default=True)
def gradcheck(seed, trials):
    """Verify analytic loss gradients with central finite differences."""
    rng = np.random.default_rng(seed)
    worst = {"dice": 0.0, "focal": 0.0, "cross_entropy": 0.0}
    for _ in range(trials):
        p = rng.uniform(0.05, 0.95, size=24)
        g = (rng.random(24) > 0.5).astype(np.float64)
        worst["dice"] = max(
            worst["dice"], losses.grad_check(lambda x: losses.dice_loss(x, g), p)
        )
        worst["focal"] = max(
            worst["focal"], losses.grad_check(lambda x: losses.focal_loss(x, g), p)
        )
        z = rng.normal(0.0, 2.0, size=11)
        label = int(rng.integers(0, 11))
        worst["cross_entropy"] = max(
            worst["cross_entropy"],
            losses.grad_check(lambda x: losses.cross_entropy(x, label), z),
        )
    ok = True
    for name, err in worst.items():
        status = "ok" if err < GRADCHECK_TOLERANCE else "FAIL"
        ok = ok and err < GRADCHECK_TOLERANCE
        click.echo(f"{name:<14} max relative error {err:.3e}  [{status}]")
    if not ok:
        sys.exit(1)


@main.command()
@click.option("--report", "report_path", required=True, type=click.Path(exists=True),
              help="eval_report.json from an eval run")
@click.option("--baseline", "baseline_path", type=click.Path(exists=True), default=None)
@click.option("--counts", "counts_path", type=click.Path(exists=True), default=None,
              help="counts.json from a predict/filter run")
def report(report_path, baseline_path, counts_path):
    """Render saved reports as fixed-width text tables."""
    with open(report_path, "r", encoding="utf-8") as fh:
        rpt = metrics.EvalReport.from_json(json.load(fh))
    baseline = None
    if baseline_path:
        with open(baseline_path, "r", encoding="utf-8") as fh:
            baseline = metrics.EvalReport.from_json(json.load(fh))
    click.echo(metrics.render_report(rpt, baseline))
    if counts_path:
        with open(counts_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        counts = postprocess.MaskCountReport(doc.get("per_image", {}), doc.get("pipelines", {}))
        click.echo("")
        click.echo(counts.render())


if __name__ == "__main__":
    main()

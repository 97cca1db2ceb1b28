"""Batch command-line interface.

Subcommands: ``gen-masks`` (pseudo-mask generation), ``refine`` (boundary
refinement), ``mix`` (soft-mixup batches), ``split`` (stratified folds), and
``eval`` (metrics from a predictions CSV). Every command continues past
per-item failures, writes a JSON report, and exits nonzero iff any item
failed. A JSON config file (``--config``) can supply any flag; explicit
flags win. ``MORPHKIT_LOG`` sets the log level.
"""
from __future__ import annotations

import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .datasets import AugmentationPipeline, apply_augmentation, derive_labels, kfold_split, load_manifest
from .errors import MorphkitError
from .imaging import BinaryMask, RasterImage, load_image, load_mask, save_image, save_mask
from .metrics import compute_metrics
from .mixup import LabeledSample, MixParams, make_mixed_batch
from .pseudomask import HeadCrop, PriorConfig, generate_pseudo_mask, right_align
from .refinement import RefinementParams, refine_contour

log = logging.getLogger("morphkit")


def _apply_config(ctx: click.Context, config_path):
    """Fill parameters from a JSON config file; explicit flags keep priority."""
    if not config_path:
        return
    with open(config_path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    for name, value in cfg.items():
        key = name.replace("-", "_")
        if key in ctx.params and ctx.get_parameter_source(key) == click.core.ParameterSource.DEFAULT:
            ctx.params[key] = value


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_batch(items, worker, workers: int):
    """Run ``worker`` over items (possibly threaded); results keep item order."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, items))
    return [worker(it) for it in items]


@click.group()
@click.version_option(version=__version__, prog_name="morphkit")
def main():
    """Pseudo-mask generation, boundary refinement, and soft-mixup batches."""
    logging.basicConfig(level=os.environ.get("MORPHKIT_LOG", "WARNING").upper())


@main.command("gen-masks")
@click.option("--input", "-i", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output", "-o", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", default=0, show_default=True, help="Accepted for interface symmetry; generation is deterministic.")
@click.option("--workers", default=1, show_default=True)
@click.option("--blur-sigma", default=1.0, show_default=True)
@click.option("--min-area-frac", default=0.02, show_default=True)
@click.option("--max-area-frac", default=0.40, show_default=True)
@click.option("--crop-margin-frac", default=0.2, show_default=True)
@click.option("--align/--no-align", default=True, show_default=True)
@click.pass_context
def cmd_gen_masks(ctx, input_dir, output_dir, config_path, seed, workers, blur_sigma,
                  min_area_frac, max_area_frac, crop_margin_frac, align):
    """Generate `<stem>_crop.png` / `<stem>_mask.png` pairs from a PNG dir."""
    _apply_config(ctx, config_path)
    p = ctx.params
    cfg = PriorConfig(
        blur_sigma=p["blur_sigma"],
        min_area_frac=p["min_area_frac"],
        max_area_frac=p["max_area_frac"],
        crop_margin_frac=p["crop_margin_frac"],
    )
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stems = sorted(f for f in Path(input_dir).glob("*.png"))

    def work(path: Path):
        stem = path.stem
        try:
            crop = generate_pseudo_mask(load_image(path), cfg)
            if p["align"]:
                crop = right_align(crop)
            save_image(crop.image, out / f"{stem}_crop.png")
            save_mask(crop.pseudo_mask, out / f"{stem}_mask.png")
            return {
                "stem": stem,
                "status": "ok",
                "score": crop.score,
                "bbox": list(crop.source_bbox),
                "rotation_deg": crop.rotation_deg,
                "flipped": crop.flipped,
            }
        except (MorphkitError, OSError, ValueError) as exc:
            log.warning("gen-masks failed on %s: %s", stem, exc)
            return {"stem": stem, "status": "error", "error": str(exc)}

    results = _run_batch(stems, work, p["workers"])
    errors = sum(r["status"] == "error" for r in results)
    _write_json(out / "gen_report.json", {"results": results, "errors": errors})
    click.echo(f"gen-masks: {len(results) - errors}/{len(results)} ok")
    sys.exit(1 if errors else 0)


@main.command("refine")
@click.option("--input", "-i", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output", "-o", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--n", default=100, show_default=True, help="Contour sample count.")
@click.option("--m", default=15, show_default=True, help="Candidates per normal line (odd).")
@click.option("--s", default=2, show_default=True, help="Smoothness band radius.")
@click.option("--c", default=1.0, show_default=True, help="Concavity penalty per radian.")
@click.option("--half-len", default=5.0, show_default=True, help="Normal line half length (px).")
@click.option("--exact-closure/--approx-closure", default=False, show_default=True)
@click.option("--overlay", is_flag=True, default=False, help="Also write `<stem>_overlay.png`.")
@click.pass_context
def cmd_refine(ctx, input_dir, output_dir, config_path, seed, workers, n, m, s, c,
               half_len, exact_closure, overlay):
    """Refine `<stem>_crop.png` + `<stem>_mask.png` pairs into `<stem>_refined.png`."""
    _apply_config(ctx, config_path)
    p = ctx.params
    params = RefinementParams(
        n=p["n"], m=p["m"], s=p["s"], c=p["c"],
        half_len=p["half_len"], exact_closure=p["exact_closure"],
    )
    src = Path(input_dir)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stems = sorted(f.name[: -len("_crop.png")] for f in src.glob("*_crop.png"))

    def work(stem: str):
        try:
            mask_path = src / f"{stem}_mask.png"
            if not mask_path.exists():
                raise MorphkitError(f"missing mask for {stem}")
            crop = HeadCrop(
                image=load_image(src / f"{stem}_crop.png"),
                pseudo_mask=load_mask(mask_path),
                source_bbox=(0, 0, 0, 0),
            )
            t0 = time.perf_counter()
            path, refined = refine_contour(crop, params)
            ms = (time.perf_counter() - t0) * 1000.0
            save_mask(refined, out / f"{stem}_refined.png")
            if p["overlay"]:
                save_image(_draw_overlay(crop.image, path.points), out / f"{stem}_overlay.png")
            return {"stem": stem, "status": "ok", "total_cost": path.total_cost, "ms": ms}
        except (MorphkitError, OSError, ValueError) as exc:
            log.warning("refine failed on %s: %s", stem, exc)
            return {"stem": stem, "status": "error", "error": str(exc)}

    results = _run_batch(stems, work, p["workers"])
    errors = sum(r["status"] == "error" for r in results)
    ok_ms = sorted(r["ms"] for r in results if r["status"] == "ok")
    report = {
        "mode": "exact" if p["exact_closure"] else "approximate",
        "params": {"n": p["n"], "m": p["m"], "s": p["s"], "c": p["c"], "half_len": p["half_len"]},
        "median_ms": ok_ms[len(ok_ms) // 2] if ok_ms else None,
        "results": results,
        "errors": errors,
    }
    _write_json(out / "refine_report.json", report)
    click.echo(f"refine: {len(results) - errors}/{len(results)} ok"
               + (f", median {report['median_ms']:.2f} ms" if ok_ms else ""))
    sys.exit(1 if errors else 0)


def _mask_path_for(crop_path: Path) -> Path:
    """`<stem>_crop.png` pairs with `<stem>_mask.png`; plain `<stem>.png`
    pairs with `<stem>_mask.png` as well."""
    stem = crop_path.stem
    if stem.endswith("_crop"):
        stem = stem[: -len("_crop")]
    return crop_path.with_name(stem + "_mask.png")


def _draw_overlay(image: RasterImage, points: np.ndarray) -> RasterImage:
    """Burn the refined contour into an RGB copy of the crop."""
    rgb = np.stack([image.to_gray()] * 3, axis=2).copy()
    closed = np.vstack([points, points[:1]])
    for a, b in zip(closed[:-1], closed[1:]):
        steps = max(2, int(np.ceil(np.linalg.norm(b - a) * 2)))
        for t in np.linspace(0.0, 1.0, steps):
            x, y = a + t * (b - a)
            xi, yi = int(round(x)), int(round(y))
            if 0 <= xi < image.width and 0 <= yi < image.height:
                rgb[yi, xi] = (1.0, 0.1, 0.1)
    return RasterImage(rgb)


@main.command("mix")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "-i", "input_dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="Directory holding the crops/masks; defaults to the manifest's directory.")
@click.option("--output", "-o", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--alpha", default=0.5, show_default=True, help="Beta(alpha, alpha) blend strength.")
@click.option("--gamma", default=0.85, show_default=True, help="Majority-label weight (recorded).")
@click.option("--augment/--no-augment", default=True, show_default=True)
@click.option("--force-lambda", default=None, type=float, help="Override every blend strength (debugging).")
@click.pass_context
def cmd_mix(ctx, manifest_path, input_dir, output_dir, config_path, seed, workers,
            alpha, gamma, augment, force_lambda):
    """Materialize a soft-mixup batch: paired PNGs plus a JSON-lines record."""
    _apply_config(ctx, config_path)
    p = ctx.params
    manifest = load_manifest(manifest_path)
    base = Path(p["input_dir"]) if p["input_dir"] else Path(manifest_path).parent
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    samples = []
    skipped = []
    item_errors = []
    for rec in manifest.records:
        y_a, y_b, agreement = derive_labels(rec.expert_labels)
        if agreement == "none":
            skipped.append(rec.path)
            continue
        try:
            crop_path = base / rec.path
            crop = load_image(crop_path)
            mask_path = _mask_path_for(crop_path)
            mask = load_mask(mask_path) if mask_path.exists() else None
            samples.append(
                LabeledSample(crop=crop, mask=mask, majority_label=y_a,
                              minority_label=y_b, sample_id=rec.path)
            )
        except (OSError, ValueError) as exc:
            item_errors.append({"path": rec.path, "error": str(exc)})

    records = []
    if samples:
        params = MixParams(alpha=p["alpha"], gamma=p["gamma"], seed=p["seed"])
        make_aug = None
        if p["augment"]:
            pipeline = AugmentationPipeline(seed=p["seed"])

            def make_aug(rng):
                def aug(crop_arr, mask_arr):
                    img, msk = apply_augmentation(
                        pipeline, RasterImage(crop_arr),
                        None if mask_arr is None else BinaryMask(mask_arr > 0.5), rng,
                    )
                    return img.data, None if msk is None else msk.data.astype(np.float64)
                return aug

        mixed = make_mixed_batch(samples, params, make_aug, lam_override=p["force_lambda"])
        for k, ms in enumerate(mixed):
            mix_id = f"mix_{k:05d}"
            save_image(RasterImage(ms.crop), out / f"{mix_id}.png")
            if ms.mask is not None:
                save_image(RasterImage(ms.mask), out / f"{mix_id}_mask.png")
            records.append({
                "id": mix_id,
                "lambda": ms.lam,
                "target": ms.target,
                "parents": list(ms.parents),
                "parent_labels": list(ms.parent_labels),
            })
    with open(out / "mixed.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    _write_json(out / "mix_report.json", {
        "mixed": len(records),
        "skipped_no_consensus": skipped,
        "errors": item_errors,
        "gamma": p["gamma"],
        "alpha": p["alpha"],
        "seed": p["seed"],
    })
    click.echo(f"mix: {len(records)} samples, {len(skipped)} skipped, {len(item_errors)} errors")
    sys.exit(1 if item_errors else 0)


@main.command("split")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--k", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_context
def cmd_split(ctx, manifest_path, output_path, config_path, k, seed):
    """Write a stratified `path,fold` CSV for the manifest."""
    _apply_config(ctx, config_path)
    p = ctx.params
    manifest = load_manifest(manifest_path)
    folds = kfold_split(manifest, k=p["k"], seed=p["seed"])
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("path,fold\n")
        for rec, fold in zip(manifest.records, folds):
            fh.write(f"{rec.path},{int(fold)}\n")
    click.echo(f"split: {len(manifest.records)} records into {p['k']} folds")
    sys.exit(0)


@main.command("eval")
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CSV with a `pred,truth` header (an optional leading `path` column is ignored).")
@click.option("--output", "-o", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--num-classes", default=None, type=int, help="Defaults to max(label)+1.")
@click.pass_context
def cmd_eval(ctx, pred_path, output_path, config_path, num_classes):
    """Compute metrics from a predictions CSV and write them as JSON."""
    _apply_config(ctx, config_path)
    p = ctx.params
    preds, truths, problems = [], [], []
    with open(pred_path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            pred_col = header.index("pred")
            truth_col = header.index("truth")
        except ValueError:
            click.echo(f"{pred_path}:1: header must name 'pred' and 'truth' columns", err=True)
            sys.exit(1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                preds.append(int(parts[pred_col]))
                truths.append(int(parts[truth_col]))
            except (IndexError, ValueError) as exc:
                problems.append(f"{pred_path}:{lineno}: {exc}")
    if problems:
        for msg in problems:
            click.echo(msg, err=True)
        sys.exit(1)
    if not preds:
        click.echo(f"{pred_path}: no data rows", err=True)
        sys.exit(1)
    k = p["num_classes"] or (max(max(preds), max(truths)) + 1)
    report = compute_metrics(preds, truths, num_classes=k)
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, report.to_dict())
    click.echo(f"eval: accuracy {report.accuracy:.4f}, f1 {report.f1:.4f}")
    sys.exit(0)


if __name__ == "__main__":
    main()

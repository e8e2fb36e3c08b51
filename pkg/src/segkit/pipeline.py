"""End-to-end everything-mode run: predict at every grid point, filter,
count, and evaluate against ground truth."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .confidence import FeatureMap
from .data import Manifest
from .errors import SegkitError
from .grid import PointGrid
from .head import HeadParams, MaskCandidate, predict_candidates
from .metrics import EvalReport, InstanceEval, instance_iou_acc, per_class_aggregate
from .postprocess import FilterConfig, MaskCountReport, run_pipeline
from .tensorio import atomic_write_text


@dataclass
class ImageResult:
    image_id: str
    candidates: list[MaskCandidate]
    survivors: list[MaskCandidate]
    evals: list[InstanceEval]


@dataclass
class EverythingModeResult:
    report: EvalReport
    counts: MaskCountReport
    images: list[ImageResult] = field(default_factory=list)


def predict_grid(
    params: HeadParams, features: FeatureMap, grid: PointGrid
) -> list[MaskCandidate]:
    """All candidates for every grid point, in row-major grid order.

    Delegates to predict_candidates so grid prediction is bit-identical to
    prompting each point individually.
    """
    candidates = []
    for x, y in grid.points:
        candidates.extend(predict_candidates(params, features, (float(x), float(y))))
    return candidates


def run_everything_mode(
    manifest: Manifest,
    params: HeadParams,
    features,
    grid: PointGrid,
    filter_config: FilterConfig | None = None,
    threads: int | None = None,
    acc: str = "recall",
) -> EverythingModeResult:
    """Predict three candidates at every grid point of every image, then
    post-process the candidate set and evaluate each ground-truth instance
    from its single assigned grid point on the full candidate set."""
    filter_config = filter_config or FilterConfig()

    def process(rec) -> ImageResult:
        fmap = features.get(rec.frame.id)
        if fmap is None:
            raise SegkitError(f"no feature map for image {rec.frame.id}")
        candidates = predict_grid(params, fmap, grid)
        evals = [
            instance_iou_acc(
                gt, candidates, grid, fmap,
                head_params=params, class_table=manifest.class_table, acc=acc,
            )
            for gt in rec.masks
        ]
        survivors = run_pipeline(candidates, filter_config)
        return ImageResult(rec.frame.id, candidates, survivors, evals)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(process, manifest.images))
    else:
        results = [process(rec) for rec in manifest.images]

    all_evals = [ev for res in results for ev in res.evals]
    report = per_class_aggregate(all_evals)
    counts = MaskCountReport(
        per_image={res.image_id: len(res.survivors) for res in results},
        pipelines={
            "vanilla": sum(len(res.candidates) for res in results),
            "filtered": sum(len(res.survivors) for res in results),
        },
    )
    return EverythingModeResult(report, counts, results)


def save_survivors(result: EverythingModeResult, out_dir, class_table) -> None:
    """One PNG per surviving mask plus an index JSON per image."""
    masks_dir = os.path.join(os.fspath(out_dir), "masks")
    os.makedirs(masks_dir, exist_ok=True)
    for res in result.images:
        image_dir = os.path.join(masks_dir, res.image_id)
        os.makedirs(image_dir, exist_ok=True)
        index = {"image_id": res.image_id, "masks": []}
        for n, cand in enumerate(res.survivors):
            mask_file = os.path.join(res.image_id, f"{n:04d}.png")
            full = os.path.join(masks_dir, mask_file)
            tmp = full + ".tmp"
            Image.fromarray(cand.mask.astype(np.uint8) * 255).save(tmp, format="PNG")
            os.replace(tmp, full)
            label = None
            if cand.label_logits is not None:
                label = class_table.name_of(int(np.argmax(cand.label_logits)))
            index["masks"].append(
                {
                    "file": mask_file,
                    "predicted_iou": cand.predicted_iou,
                    "prompt_point": [cand.prompt_point[0], cand.prompt_point[1]],
                    "label": label,
                }
            )
        atomic_write_text(
            os.path.join(masks_dir, f"{res.image_id}.json"),
            json.dumps(index, indent=2) + "\n",
        )

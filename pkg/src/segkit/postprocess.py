"""Everything-mode output filtering: confidence threshold, region cleanup,
and greedy box-level non-maximum suppression, plus mask counting reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .head import MaskCandidate
from .tensorio import atomic_write_text

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class FilterConfig:
    pred_iou_threshold: float = 0.3
    box_iou_cutoff: float = 0.3
    min_region_area: int = 150

    def __post_init__(self):
        if not 0.0 <= self.pred_iou_threshold <= 1.0:
            raise ValueError("pred_iou_threshold must be in [0, 1]")
        if not 0.0 <= self.box_iou_cutoff <= 1.0:
            raise ValueError("box_iou_cutoff must be in [0, 1]")
        if self.min_region_area < 0:
            raise ValueError("min_region_area must be >= 0")


def threshold_by_pred_iou(
    candidates: list[MaskCandidate], threshold: float
) -> list[MaskCandidate]:
    """Keep candidates with predicted_iou >= threshold, order preserved."""
    return [c for c in candidates if c.predicted_iou >= threshold]


def mask_to_box(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight bounding box (x0, y0, x1, y1), exclusive upper bounds."""
    ys, xs = np.nonzero(mask)
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def box_iou(a, b) -> float:
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0, ix1 - ix0) * max(0, iy1 - iy0)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union else 0.0


def box_nms(candidates: list[MaskCandidate], cutoff: float) -> list[MaskCandidate]:
    """Greedy suppression on tight mask bounding boxes.

    Order: predicted_iou descending, ties by larger mask area then lower
    index. A candidate survives iff its box IoU with every already-kept
    box is < cutoff. Candidates must have non-empty masks.
    """
    boxes = [mask_to_box(c.mask) for c in candidates]
    order = sorted(
        range(len(candidates)),
        key=lambda i: (-candidates[i].predicted_iou, -candidates[i].area, i),
    )
    kept: list[int] = []
    for i in order:
        if all(box_iou(boxes[i], boxes[j]) < cutoff for j in kept):
            kept.append(i)
    return [candidates[i] for i in kept]


def clean_regions(mask: np.ndarray, min_area: int) -> np.ndarray:
    """Remove small 8-connected islands and fill small enclosed holes.

    Foreground components with area < min_area are removed; background
    components with area < min_area that do not touch the border are
    filled. Idempotent.
    """
    out = np.asarray(mask).astype(bool).copy()
    labels, n = ndimage.label(out, structure=_EIGHT_CONNECTED)
    if n:
        areas = np.bincount(labels.ravel())
        small = areas < min_area
        small[0] = False
        out[small[labels]] = False
    bg_labels, n = ndimage.label(~out, structure=_EIGHT_CONNECTED)
    if n:
        areas = np.bincount(bg_labels.ravel())
        border = np.unique(
            np.concatenate(
                [bg_labels[0], bg_labels[-1], bg_labels[:, 0], bg_labels[:, -1]]
            )
        )
        fill = areas < min_area
        fill[0] = False
        fill[border] = False
        out[fill[bg_labels]] = True
    return out


def run_pipeline(
    candidates: list[MaskCandidate], config: FilterConfig
) -> list[MaskCandidate]:
    """Confidence threshold -> drop empties -> region cleanup -> box NMS."""
    survivors = threshold_by_pred_iou(candidates, config.pred_iou_threshold)
    survivors = [c for c in survivors if c.mask.any()]
    cleaned = []
    for c in survivors:
        mask = clean_regions(c.mask, config.min_region_area)
        if mask.any():
            cleaned.append(
                MaskCandidate(mask, c.logits, c.predicted_iou, c.prompt_point, c.label_logits)
            )
    return box_nms(cleaned, config.box_iou_cutoff)


@dataclass
class MaskCountReport:
    """Surviving-mask totals, optionally compared across named pipelines."""

    per_image: dict[str, int] = field(default_factory=dict)
    pipelines: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.per_image.values())

    @property
    def per_image_mean(self) -> float:
        return self.total / len(self.per_image) if self.per_image else 0.0

    def to_json(self):
        return {
            "total": self.total,
            "per_image_mean": self.per_image_mean,
            "per_image": dict(sorted(self.per_image.items())),
            "pipelines": self.pipelines,
        }

    def render(self) -> str:
        lines = [
            f"{'pipeline':<16}{'output masks':>14}",
            f"{'-' * 30}",
        ]
        for name, count in self.pipelines.items():
            lines.append(f"{name:<16}{count:>14}")
        lines.append("")
        lines.append(f"images: {len(self.per_image)}")
        lines.append(f"total surviving masks: {self.total}")
        lines.append(f"mean per image: {self.per_image_mean:.2f}")
        return "\n".join(lines)


def count_masks(
    results: dict[str, list], pipelines: dict[str, int] | None = None
) -> MaskCountReport:
    per_image = {image_id: len(masks) for image_id, masks in results.items()}
    report = MaskCountReport(per_image, dict(pipelines or {}))
    if "filtered" not in report.pipelines:
        report.pipelines["filtered"] = report.total
    return report


def save_count_report(report: MaskCountReport, json_path, text_path=None) -> None:
    atomic_write_text(json_path, json.dumps(report.to_json(), indent=2) + "\n")
    if text_path is not None:
        atomic_write_text(text_path, report.render() + "\n")

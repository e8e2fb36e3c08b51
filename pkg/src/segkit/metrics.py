"""Single-foreground-point evaluation: per-instance IoU/Acc, per-class
aggregation, classification accuracy, and report rendering.

"Acc" is foreground recall |P & G| / |G| by default: the per-class pixel
accuracy convention, and consistent with IoU <= Acc. The exact definition
is configurable via the ``acc`` argument of instance_iou_acc.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .confidence import confidence_map, location_prior, mask_pooled_embedding
from .data import InstanceMask
from .grid import PointGrid, nearest_neighbour_assign
from .head import MaskCandidate, classify
from .tensorio import atomic_write_text


@dataclass(frozen=True)
class InstanceEval:
    instance_id: str
    label: str
    iou: float
    acc: float
    predicted_label: str | None
    matched: bool


@dataclass(frozen=True)
class ClassStats:
    count: int
    iou: float
    acc: float
    cls_acc: float


@dataclass
class EvalReport:
    per_class: dict[str, ClassStats]
    miou: float
    macc: float
    mean_cls_acc: float

    def to_json(self):
        return {
            "per_class": {
                name: {
                    "count": s.count,
                    "iou": s.iou,
                    "acc": s.acc,
                    "cls_acc": s.cls_acc,
                }
                for name, s in sorted(self.per_class.items())
            },
            "miou": self.miou,
            "macc": self.macc,
            "mean_cls_acc": self.mean_cls_acc,
        }

    @classmethod
    def from_json(cls, doc) -> "EvalReport":
        per_class = {
            name: ClassStats(row["count"], row["iou"], row["acc"], row["cls_acc"])
            for name, row in doc["per_class"].items()
        }
        return cls(per_class, doc["miou"], doc["macc"], doc["mean_cls_acc"])


def pixel_iou_acc(pred: np.ndarray, gt: np.ndarray, acc: str = "recall"):
    """IoU and accuracy by pixel counting; acc is 'recall' or 'pixel'."""
    inter = np.logical_and(pred, gt).sum()
    union = np.logical_or(pred, gt).sum()
    iou = inter / union if union else 0.0
    if acc == "recall":
        gt_area = gt.sum()
        accuracy = inter / gt_area if gt_area else 0.0
    elif acc == "pixel":
        accuracy = (pred == gt).mean()
    else:
        raise ValueError(f"unknown accuracy definition {acc!r}")
    return float(iou), float(accuracy)


def instance_iou_acc(
    gt: InstanceMask,
    predictions: list[MaskCandidate],
    grid: PointGrid,
    features,
    head_params=None,
    class_table=None,
    acc: str = "recall",
) -> InstanceEval:
    """Score one ground-truth instance from its single assigned grid point.

    The instance's prompt point is recomputed through the confidence path,
    snapped to the grid, and the most confident prediction at that exact
    grid point is evaluated. No prediction there means a zero score.
    """
    embedding = mask_pooled_embedding(features, gt)
    cmap = confidence_map(features, embedding)
    prior = location_prior(cmap, grid.width, grid.height)
    target = nearest_neighbour_assign(prior.pixel, grid, gt.instance_id)

    at_point = [
        c for c in predictions if tuple(c.prompt_point) == tuple(target.grid_point)
    ]
    if not at_point:
        return InstanceEval(gt.instance_id, gt.label, 0.0, 0.0, None, False)
    best = max(range(len(at_point)), key=lambda i: (at_point[i].predicted_iou, -i))
    chosen = at_point[best]
    iou, accuracy = pixel_iou_acc(chosen.mask, gt.mask, acc)

    predicted_label = None
    if head_params is not None and class_table is not None:
        predicted_label = class_table.name_of(classify(head_params, features, chosen))
    elif chosen.label_logits is not None and class_table is not None:
        predicted_label = class_table.name_of(int(np.argmax(chosen.label_logits)))
    return InstanceEval(gt.instance_id, gt.label, iou, accuracy, predicted_label, True)


def classification_accuracy(evals: list[InstanceEval]) -> tuple[dict[str, float], float]:
    """Per-class fraction of instances whose predicted label is correct.

    Unmatched instances count as incorrect.
    """
    per_class_hits: dict[str, list[int]] = {}
    for ev in evals:
        hit = int(ev.matched and ev.predicted_label == ev.label)
        per_class_hits.setdefault(ev.label, []).append(hit)
    per_class = {
        name: float(np.mean(hits)) for name, hits in per_class_hits.items()
    }
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, mean


def per_class_aggregate(evals: list[InstanceEval]) -> EvalReport:
    """Unweighted per-class means; mIoU/mAcc over represented classes only."""
    grouped: dict[str, list[InstanceEval]] = {}
    for ev in evals:
        grouped.setdefault(ev.label, []).append(ev)
    cls_acc, mean_cls_acc = classification_accuracy(evals)
    per_class = {}
    for name, rows in grouped.items():
        per_class[name] = ClassStats(
            count=len(rows),
            iou=float(np.mean([r.iou for r in rows])),
            acc=float(np.mean([r.acc for r in rows])),
            cls_acc=cls_acc[name],
        )
    if per_class:
        miou = float(np.mean([s.iou for s in per_class.values()]))
        macc = float(np.mean([s.acc for s in per_class.values()]))
    else:
        miou = macc = 0.0
    return EvalReport(per_class, miou, macc, mean_cls_acc)


def render_report(report: EvalReport, baseline: EvalReport | None = None) -> str:
    """Fixed-width per-class table with optional baseline columns and deltas."""
    header = f"{'class':<22}{'count':>7}{'IoU':>9}{'Acc':>9}{'ClsAcc':>9}"
    if baseline is not None:
        header += f"{'base IoU':>10}{'dIoU':>9}{'base Acc':>10}{'dAcc':>9}"
    lines = [header, "-" * len(header)]
    for name in sorted(report.per_class):
        s = report.per_class[name]
        line = f"{name:<22}{s.count:>7}{s.iou:>9.4f}{s.acc:>9.4f}{s.cls_acc:>9.4f}"
        if baseline is not None:
            b = baseline.per_class.get(name, ClassStats(0, 0.0, 0.0, 0.0))
            line += (
                f"{b.iou:>10.4f}{s.iou - b.iou:>+9.4f}"
                f"{b.acc:>10.4f}{s.acc - b.acc:>+9.4f}"
            )
        lines.append(line)
    lines.append("-" * len(header))
    summary = (
        f"{'mean':<22}{sum(s.count for s in report.per_class.values()):>7}"
        f"{report.miou:>9.4f}{report.macc:>9.4f}{report.mean_cls_acc:>9.4f}"
    )
    if baseline is not None:
        summary += (
            f"{baseline.miou:>10.4f}{report.miou - baseline.miou:>+9.4f}"
            f"{baseline.macc:>10.4f}{report.macc - baseline.macc:>+9.4f}"
        )
    lines.append(summary)
    return "\n".join(lines)


def save_report(report: EvalReport, json_path, text_path=None, baseline=None) -> None:
    atomic_write_text(json_path, json.dumps(report.to_json(), indent=2) + "\n")
    if text_path is not None:
        atomic_write_text(text_path, render_report(report, baseline) + "\n")

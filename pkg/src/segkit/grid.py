"""Everything-mode point grid and nearest-neighbour prompt assignment.

A K x K grid of cell-center points covers the canvas; each ground-truth
mask's location prior is snapped to the Euclidean-nearest grid point so
that training prompts coincide with everything-mode prompts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SegkitError
from .tensorio import atomic_write_text
from .validation import check_point_in_canvas


@dataclass(frozen=True)
class PointGrid:
    per_side: int
    width: int
    height: int
    points: np.ndarray  # (per_side**2, 2) float64, (x, y), row-major cells

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Assignment:
    instance_id: str
    prior: tuple[float, float]
    grid_index: int
    grid_point: tuple[float, float]


def build_grid(per_side: int, width: int, height: int) -> PointGrid:
    """Cell-center points: ((j+0.5)*W/K, (i+0.5)*H/K) for cell (i, j)."""
    if per_side < 1:
        raise ValueError(f"per_side must be >= 1, got {per_side}")
    if width < per_side or height < per_side:
        raise ValueError(
            f"canvas {width}x{height} smaller than grid side {per_side}"
        )
    j = np.arange(per_side, dtype=np.float64)
    xs = (j + 0.5) * width / per_side
    ys = (j + 0.5) * height / per_side
    gx, gy = np.meshgrid(xs, ys)  # row-major: row i = y, col j = x
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)
    points.setflags(write=False)
    return PointGrid(per_side, width, height, points)


def nearest_neighbour_assign(
    prior: tuple[float, float], grid: PointGrid, instance_id: str = ""
) -> Assignment:
    """Snap a prior to the closest grid point; ties go to the lowest index.

    Distances are computed in double precision so a brute-force scan over
    all grid points gives the identical answer.
    """
    x, y = check_point_in_canvas(prior, grid.width, grid.height)
    d2 = (grid.points[:, 0] - x) ** 2 + (grid.points[:, 1] - y) ** 2
    index = int(np.argmin(d2))  # argmin returns the first (lowest) minimum
    gx, gy = grid.points[index]
    return Assignment(instance_id, (x, y), index, (float(gx), float(gy)))


def assign_dataset(manifest, features, grid: PointGrid) -> list[Assignment]:
    """One assignment per instance mask, in manifest order.

    The prior for each mask comes from the confidence-map path (mask-pooled
    embedding, cosine map, argmax); see the confidence module. Assignments
    need not be injective: nearby priors can share a grid point.
    """
    from .confidence import confidence_map, location_prior, mask_pooled_embedding

    assignments = []
    for rec in manifest.images:
        fmap = features.get(rec.frame.id)
        if fmap is None:
            raise SegkitError(f"no feature map for image {rec.frame.id}")
        for mask in rec.masks:
            embedding = mask_pooled_embedding(fmap, mask)
            cmap = confidence_map(fmap, embedding)
            prior = location_prior(cmap, rec.frame.width, rec.frame.height)
            assignments.append(
                nearest_neighbour_assign(prior.pixel, grid, mask.instance_id)
            )
    return assignments


def save_assignments(assignments: list[Assignment], path) -> None:
    rows = [
        {
            "instance_id": a.instance_id,
            "prior": [a.prior[0], a.prior[1]],
            "grid_index": a.grid_index,
            "grid_point": [a.grid_point[0], a.grid_point[1]],
        }
        for a in assignments
    ]
    atomic_write_text(path, json.dumps(rows, indent=2) + "\n")


def load_assignments(path) -> list[Assignment]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = json.load(fh)
    return [
        Assignment(
            r["instance_id"],
            (r["prior"][0], r["prior"][1]),
            int(r["grid_index"]),
            (r["grid_point"][0], r["grid_point"][1]),
        )
        for r in rows
    ]

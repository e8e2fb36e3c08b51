"""Synthetic shape dataset: colored rectangles/ellipses with z-order occlusion.

Desk-scale stand-in for simulator captures. Each class has a fixed fill
color, each image draws a handful of shapes of distinct classes, and every
emitted mask is the visible (post-occlusion) region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import (
    CATEGORIES,
    SIZES,
    ClassEntry,
    ClassTable,
    ImageFrame,
    ImageRecord,
    InstanceMask,
    Manifest,
)
from .errors import GenerationError

# Fill colors chosen to maximize pairwise angular separation in RGB space
# (max pairwise cosine 0.855), so color-keyed heads can tell classes apart.
PALETTE = [
    ("red", (230, 0, 0)),
    ("green", (0, 230, 0)),
    ("blue", (0, 0, 230)),
    ("lime", (132, 230, 92)),
    ("cyan", (0, 230, 230)),
    ("pink", (230, 0, 160)),
    ("orange", (230, 160, 0)),
    ("violet", (132, 92, 230)),
]

_MIN_VISIBLE_AREA = 40
_MAX_IMAGE_RETRIES = 200


def toy_class_table(num_classes: int = 8) -> ClassTable:
    """Reduced class table for synthetic data, one palette color per class."""
    if not 1 <= num_classes <= len(PALETTE):
        raise GenerationError(
            f"num_classes must be in [1, {len(PALETTE)}], got {num_classes}"
        )
    entries = []
    for i in range(num_classes):
        name = PALETTE[i][0].capitalize() + "Shape"
        entries.append(
            ClassEntry(name, CATEGORIES[i % len(CATEGORIES)], SIZES[i % len(SIZES)])
        )
    return ClassTable(entries)


def class_color(class_index: int) -> tuple[int, int, int]:
    return PALETTE[class_index % len(PALETTE)][1]


@dataclass
class SynthConfig:
    num_images: int = 8
    canvas: int = 64
    num_classes: int = 8
    shapes_min: int = 2
    shapes_max: int = 4
    seed: int = 0


def synth_generate(config: SynthConfig) -> Manifest:
    """Generate a deterministic synthetic manifest for a fixed seed."""
    table = toy_class_table(config.num_classes)
    if config.shapes_min < 1 or config.shapes_max < config.shapes_min:
        raise GenerationError(
            f"bad shapes range [{config.shapes_min}, {config.shapes_max}]"
        )
    if config.shapes_max > len(table):
        raise GenerationError(
            f"{config.shapes_max} shapes requested but only {len(table)} classes "
            "available for distinct-class placement"
        )
    if config.canvas < 32:
        raise GenerationError(f"canvas {config.canvas} too small for shapes")

    rng = np.random.default_rng(config.seed)
    images = []
    for idx in range(config.num_images):
        images.append(_generate_image(f"img{idx:04d}", config, table, rng))
    return Manifest(images, table)


@dataclass(frozen=True)
class ShapeSpec:
    kind: str  # "rect" or "ellipse"
    cx: int
    cy: int
    half_w: int
    half_h: int
    class_id: int


def render_scene(
    image_id: str, specs: list[ShapeSpec], table: ClassTable, side: int
) -> ImageRecord:
    """Draw shapes in z order; each mask is the visible region of its shape."""
    owner = np.full((side, side), -1, dtype=np.int32)
    for shape_idx, spec in enumerate(specs):
        region = _shape_region(spec.kind, spec.cx, spec.cy, spec.half_w, spec.half_h, side)
        owner[region] = shape_idx  # later shapes occlude earlier ones
    pixels = np.zeros((side, side, 3), dtype=np.uint8)
    masks = []
    for shape_idx, spec in enumerate(specs):
        mask = owner == shape_idx
        if not mask.any():
            raise GenerationError(
                f"{image_id}: shape {shape_idx} fully occluded"
            )
        pixels[mask] = class_color(spec.class_id)
        masks.append(
            InstanceMask(mask, table.name_of(spec.class_id), f"{image_id}_s{shape_idx}")
        )
    return ImageRecord(ImageFrame(image_id, pixels), masks)


def _generate_image(
    image_id: str, config: SynthConfig, table: ClassTable, rng
) -> ImageRecord:
    side = config.canvas
    for _ in range(_MAX_IMAGE_RETRIES):
        n_shapes = int(rng.integers(config.shapes_min, config.shapes_max + 1))
        class_ids = rng.choice(len(table), size=n_shapes, replace=False)
        specs = []
        for shape_idx in range(n_shapes):
            kind = "rect" if rng.random() < 0.5 else "ellipse"
            half_w = int(rng.integers(6, max(7, side // 4)))
            half_h = int(rng.integers(6, max(7, side // 4)))
            cx = int(rng.integers(half_w, side - half_w))
            cy = int(rng.integers(half_h, side - half_h))
            specs.append(
                ShapeSpec(kind, cx, cy, half_w, half_h, int(class_ids[shape_idx]))
            )
        try:
            record = render_scene(image_id, specs, table, side)
        except GenerationError:
            continue
        if any(m.area < _MIN_VISIBLE_AREA for m in record.masks):
            continue
        return record
    raise GenerationError(
        f"could not place {config.shapes_min}..{config.shapes_max} shapes with "
        f"visible area >= {_MIN_VISIBLE_AREA} px on a {side} canvas"
    )


def _shape_region(kind, cx, cy, half_w, half_h, side) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side]
    if kind == "rect":
        return (
            (np.abs(xx - cx) <= half_w)
            & (np.abs(yy - cy) <= half_h)
        )
    return ((xx - cx) / half_w) ** 2 + ((yy - cy) / half_h) ** 2 <= 1.0

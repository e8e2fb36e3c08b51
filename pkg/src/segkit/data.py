"""Dataset model: image/masks/labels manifests, resizing, and statistics.

Manifest schema (JSON, UTF-8), paths relative to the manifest file:

    { "class_table": [ {"name": str, "category": str, "size": str}, ... ],
      "images": [ { "id": str, "file": str, "width": int, "height": int,
                    "masks": [ {"file": str, "label": str,
                                "instance_id": str} ] } ] }

Images and masks are PNG; masks are single-channel 0/255.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import LoadError, ValidationError
from .tensorio import atomic_write_text
from .validation import check_binary_mask

CATEGORIES = ("pickupable", "receptacle", "openable")
SIZES = ("small", "medium", "large")


@dataclass(frozen=True)
class ClassEntry:
    name: str
    category: str
    size: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValidationError(f"unknown category {self.category!r}")
        if self.size not in SIZES:
            raise ValidationError(f"unknown size {self.size!r}")


class ClassTable:
    """Ordered class list with unique names; lookup by name or index."""

    def __init__(self, entries):
        self.entries: tuple[ClassEntry, ...] = tuple(entries)
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValidationError("class names must be unique")
        self._index = {e.name: i for i, e in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index_of(self, name: str) -> int:
        if name not in self._index:
            raise ValidationError(f"label {name!r} not in class table")
        return self._index[name]

    def name_of(self, index: int) -> str:
        return self.entries[index].name

    def to_json(self):
        return [
            {"name": e.name, "category": e.category, "size": e.size}
            for e in self.entries
        ]

    @classmethod
    def from_json(cls, rows):
        return cls(ClassEntry(r["name"], r["category"], r["size"]) for r in rows)


@dataclass
class ImageFrame:
    """One RGB frame; ``pixels`` is H x W x 3 uint8."""

    id: str
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValidationError(
                f"image {self.id}: expected H x W x 3, got {self.pixels.shape}"
            )
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"image {self.id}: empty canvas")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 3


@dataclass
class InstanceMask:
    """Ground-truth binary mask for one object instance."""

    mask: np.ndarray
    label: str
    instance_id: str

    def __post_init__(self):
        self.mask = check_binary_mask(self.mask, f"mask {self.instance_id}")
        if not self.mask.any():
            raise ValidationError(f"mask {self.instance_id} has no foreground")

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass
class ImageRecord:
    frame: ImageFrame
    masks: list[InstanceMask] = field(default_factory=list)


@dataclass
class Manifest:
    images: list[ImageRecord]
    class_table: ClassTable

    @property
    def image_count(self) -> int:
        return len(self.images)

    @property
    def mask_count(self) -> int:
        return sum(len(rec.masks) for rec in self.images)


def load_manifest(path) -> Manifest:
    """Load and validate a manifest with all referenced PNGs decoded."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise LoadError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"manifest {path} is not valid JSON: {exc}") from exc

    base = os.path.dirname(os.path.abspath(path))
    table = ClassTable.from_json(doc.get("class_table", []))
    images = []
    for img in doc.get("images", []):
        frame = ImageFrame(img["id"], _load_png(base, img["file"], mode="RGB"))
        if frame.width != img["width"] or frame.height != img["height"]:
            raise ValidationError(
                f"image {img['id']}: file is {frame.width}x{frame.height}, "
                f"manifest says {img['width']}x{img['height']}"
            )
        masks = []
        for m in img["masks"]:
            raw = _load_png(base, m["file"], mode="L")
            if raw.shape != (frame.height, frame.width):
                raise ValidationError(
                    f"mask {m['instance_id']}: shape {raw.shape} does not match "
                    f"frame {frame.height}x{frame.width}"
                )
            label = m["label"]
            table.index_of(label)  # raises on unknown labels
            masks.append(InstanceMask(raw, label, m["instance_id"]))
        images.append(ImageRecord(frame, masks))
    return Manifest(images, table)


def save_manifest(manifest: Manifest, path) -> None:
    """Write manifest JSON plus one PNG per frame and per mask next to it."""
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    os.makedirs(base, exist_ok=True)
    doc = {"class_table": manifest.class_table.to_json(), "images": []}
    for rec in manifest.images:
        img_file = f"{rec.frame.id}.png"
        _save_png(os.path.join(base, img_file), rec.frame.pixels)
        entry = {
            "id": rec.frame.id,
            "file": img_file,
            "width": rec.frame.width,
            "height": rec.frame.height,
            "masks": [],
        }
        for m in rec.masks:
            mask_file = f"{rec.frame.id}_{m.instance_id}.png"
            _save_png(os.path.join(base, mask_file), m.mask.astype(np.uint8) * 255)
            entry["masks"].append(
                {"file": mask_file, "label": m.label, "instance_id": m.instance_id}
            )
        doc["images"].append(entry)
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def resize_to_canvas(
    frame: ImageFrame, masks: list[InstanceMask], side: int
) -> tuple[ImageFrame, list[InstanceMask]]:
    """Resample frame (bilinear) and masks (nearest) to a side x side canvas.

    Nearest-neighbour keeps masks strictly binary; a mask that loses all
    foreground in the process is an error rather than a silent drop.
    """
    if side < max(frame.width, frame.height):
        raise ValueError(
            f"side {side} smaller than frame {frame.width}x{frame.height}"
        )
    if side == frame.width == frame.height:
        return frame, masks
    image = Image.fromarray(frame.pixels).resize((side, side), Image.BILINEAR)
    out_frame = ImageFrame(frame.id, np.asarray(image))
    out_masks = []
    for m in masks:
        resized = Image.fromarray(m.mask.astype(np.uint8) * 255).resize(
            (side, side), Image.NEAREST
        )
        arr = np.asarray(resized) > 0
        if not arr.any():
            raise ValidationError(
                f"mask {m.instance_id} became empty when resized to {side}"
            )
        out_masks.append(InstanceMask(arr, m.label, m.instance_id))
    return out_frame, out_masks


@dataclass
class StatsReport:
    image_count: int
    mask_count: int
    per_class: dict[str, int]
    per_category: dict[str, int]
    per_size: dict[str, int]

    def to_json(self):
        return {
            "image_count": self.image_count,
            "mask_count": self.mask_count,
            "per_class": dict(sorted(self.per_class.items())),
            "per_category": self.per_category,
            "per_size": self.per_size,
        }

    def render(self) -> str:
        lines = [
            f"images: {self.image_count}",
            f"masks:  {self.mask_count}",
            "",
            f"{'class':<22}{'category':<12}{'size':<8}{'count':>8}",
        ]
        for name, count in sorted(self.per_class.items(), key=lambda kv: (-kv[1], kv[0])):
            entry = self._entries.get(name)
            cat = entry.category if entry else "?"
            size = entry.size if entry else "?"
            lines.append(f"{name:<22}{cat:<12}{size:<8}{count:>8}")
        lines.append("")
        for cat in CATEGORIES:
            lines.append(f"total {cat:<12}{self.per_category.get(cat, 0):>8}")
        for size in SIZES:
            lines.append(f"total {size:<12}{self.per_size.get(size, 0):>8}")
        return "\n".join(lines)


def dataset_stats(manifest: Manifest) -> StatsReport:
    per_class: Counter = Counter()
    for rec in manifest.images:
        for m in rec.masks:
            per_class[m.label] += 1
    per_category: Counter = Counter()
    per_size: Counter = Counter()
    entries = {e.name: e for e in manifest.class_table}
    for name, count in per_class.items():
        entry = entries[name]
        per_category[entry.category] += count
        per_size[entry.size] += count
    report = StatsReport(
        image_count=manifest.image_count,
        mask_count=manifest.mask_count,
        per_class=dict(per_class),
        per_category=dict(per_category),
        per_size=dict(per_size),
    )
    report._entries = entries
    return report


def _load_png(base: str, rel: str, mode: str) -> np.ndarray:
    full = os.path.join(base, rel)
    if not os.path.exists(full):
        raise LoadError(f"referenced file does not exist: {full}")
    try:
        with Image.open(full) as img:
            return np.asarray(img.convert(mode))
    except OSError as exc:
        raise LoadError(f"cannot decode {full}: {exc}") from exc


def _save_png(path: str, array: np.ndarray) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    Image.fromarray(array).save(tmp, format="PNG")
    os.replace(tmp, path)


# 54 indoor object classes: 25 pickupable, 18 receptacles, 11 openable.
# Openable classes span medium and large; the split below is by typical
# visual size since the source statistics do not separate them.
_DEFAULT_CLASSES = [
    # receptacles, large
    ("CounterTop", "receptacle", "large"),
    ("DiningTable", "receptacle", "large"),
    ("Sofa", "receptacle", "large"),
    ("Bed", "receptacle", "large"),
    ("Bathtub", "receptacle", "large"),
    ("Desk", "receptacle", "large"),
    ("BathtubBasin", "receptacle", "large"),
    ("TVStand", "receptacle", "large"),
    # receptacles, medium
    ("Shelf", "receptacle", "medium"),
    ("Sink", "receptacle", "medium"),
    ("GarbageCan", "receptacle", "medium"),
    ("SideTable", "receptacle", "medium"),
    ("SinkBasin", "receptacle", "medium"),
    ("ArmChair", "receptacle", "medium"),
    ("CoffeeTable", "receptacle", "medium"),
    ("Ottoman", "receptacle", "medium"),
    # receptacles, small
    ("StoveBurner", "receptacle", "small"),
    ("ToiletPaperHanger", "receptacle", "small"),
    # openable
    ("Cabinet", "openable", "large"),
    ("Drawer", "openable", "medium"),
    ("Toilet", "openable", "medium"),
    ("Blinds", "openable", "large"),
    ("Fridge", "openable", "large"),
    ("Microwave", "openable", "medium"),
    ("Dresser", "openable", "large"),
    ("ShowerDoor", "openable", "large"),
    ("ShowerCurtain", "openable", "large"),
    ("Safe", "openable", "medium"),
    ("LaundryHumper", "openable", "medium"),
    # pickupable, medium
    ("Statue", "pickupable", "medium"),
    ("Laptop", "pickupable", "medium"),
    ("Pan", "pickupable", "medium"),
    ("Pot", "pickupable", "medium"),
    ("Vase", "pickupable", "medium"),
    ("TissueBox", "pickupable", "medium"),
    ("BaseballBat", "pickupable", "medium"),
    ("WateringCan", "pickupable", "medium"),
    # pickupable, small
    ("SoapBottle", "pickupable", "small"),
    ("ToiletPaper", "pickupable", "small"),
    ("Bowl", "pickupable", "small"),
    ("Mug", "pickupable", "small"),
    ("Box", "pickupable", "small"),
    ("Plate", "pickupable", "small"),
    ("Plunger", "pickupable", "small"),
    ("SprayBottle", "pickupable", "small"),
    ("ScrubBrush", "pickupable", "small"),
    ("Book", "pickupable", "small"),
    ("DishSponge", "pickupable", "small"),
    ("Cup", "pickupable", "small"),
    ("SoapBar", "pickupable", "small"),
    ("AlarmClock", "pickupable", "small"),
    ("Newspaper", "pickupable", "small"),
    ("PaperTowelRoll", "pickupable", "small"),
    ("BasketBall", "pickupable", "small"),
]


def default_class_table() -> ClassTable:
    return ClassTable(ClassEntry(*row) for row in _DEFAULT_CLASSES)

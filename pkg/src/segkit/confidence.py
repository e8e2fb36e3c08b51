"""Location confidence maps: mask-pooled embeddings and cosine similarity.

The target object's embedding is the average feature vector over its mask;
cosine similarity against every feature cell gives a confidence map whose
argmax, mapped back to the canvas, is the object's location prior.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .data import InstanceMask, Manifest
from .errors import SegkitError
from .tensorio import read_feat
from .validation import check_finite

TOY_CHANNELS = 5  # box-downsampled RGB + normalized x, y


@dataclass
class FeatureMap:
    image_id: str
    values: np.ndarray  # (C, fh, fw)
    provenance: str = "toy-encoder"  # or "bridge-export"
    canvas_w: int | None = None
    canvas_h: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise SegkitError(
                f"feature map {self.image_id}: expected (C, fh, fw), "
                f"got {self.values.shape}"
            )
        check_finite(self.values, f"feature map {self.image_id}")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def fh(self) -> int:
        return self.values.shape[1]

    @property
    def fw(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class MaskEmbedding:
    vector: np.ndarray
    source_instance: str


@dataclass(frozen=True)
class ConfidenceMap:
    values: np.ndarray  # (fh, fw) in [-1, 1]
    argmax_cell: tuple[int, int]  # (row, col)


@dataclass(frozen=True)
class LocationPrior:
    pixel: tuple[int, int]  # (x, y) on the full canvas
    confidence: float


def downsample_mask(mask: np.ndarray, fh: int, fw: int) -> np.ndarray:
    """Nearest-neighbour downsample sampling source pixel centers."""
    h, w = mask.shape
    rows = np.minimum(((np.arange(fh) + 0.5) * h / fh).astype(int), h - 1)
    cols = np.minimum(((np.arange(fw) + 0.5) * w / fw).astype(int), w - 1)
    return mask[np.ix_(rows, cols)]


def mask_pooled_embedding(features: FeatureMap, mask: InstanceMask) -> MaskEmbedding:
    """Average the feature vectors over the mask's foreground cells.

    If nearest-neighbour downsampling empties the mask, fall back to the
    single cell closest to the mask centroid.
    """
    ds = downsample_mask(mask.mask, features.fh, features.fw)
    if ds.any():
        vector = features.values[:, ds].mean(axis=1)
    else:
        ys, xs = np.nonzero(mask.mask)
        h, w = mask.mask.shape
        row = min(int(ys.mean() * features.fh / h), features.fh - 1)
        col = min(int(xs.mean() * features.fw / w), features.fw - 1)
        vector = features.values[:, row, col].copy()
    return MaskEmbedding(vector, mask.instance_id)


def confidence_map(features: FeatureMap, embedding: MaskEmbedding) -> ConfidenceMap:
    """Per-cell cosine similarity; zero-norm cells map to 0, not NaN."""
    if embedding.vector.shape[0] != features.channels:
        raise ValueError(
            f"channel mismatch: embedding {embedding.vector.shape[0]} vs "
            f"features {features.channels}"
        )
    flat = features.values.reshape(features.channels, -1)
    cell_norms = np.linalg.norm(flat, axis=0)
    emb_norm = np.linalg.norm(embedding.vector)
    dots = embedding.vector @ flat
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = dots / (cell_norms * emb_norm)
    sims[~np.isfinite(sims)] = 0.0
    sims = np.clip(sims, -1.0, 1.0).reshape(features.fh, features.fw)
    best = int(np.argmax(sims))  # first maximum = lowest row-major index
    return ConfidenceMap(sims, (best // features.fw, best % features.fw))


def location_prior(cmap: ConfidenceMap, canvas_w: int, canvas_h: int) -> LocationPrior:
    """Map the argmax cell center to canvas pixel coordinates.

    Rounding is half-away-from-zero; the result is clamped inside the canvas.
    """
    fh, fw = cmap.values.shape
    if canvas_w < fw or canvas_h < fh:
        raise ValueError(
            f"canvas {canvas_w}x{canvas_h} smaller than map {fw}x{fh}"
        )
    row, col = cmap.argmax_cell
    x = _round_half_away((col + 0.5) * canvas_w / fw - 0.5)
    y = _round_half_away((row + 0.5) * canvas_h / fh - 0.5)
    x = min(max(x, 0), canvas_w - 1)
    y = min(max(y, 0), canvas_h - 1)
    return LocationPrior((x, y), float(cmap.values[row, col]))


def _round_half_away(v: float) -> int:
    return int(np.floor(v + 0.5)) if v >= 0 else -int(np.floor(-v + 0.5))


def toy_encode(frame, feature_size: int | None = None) -> FeatureMap:
    """Toy encoder: box-downsampled RGB plus two normalized coordinate channels.

    Keeps color-distinct objects separable without any learned network.
    The canvas must be divisible by the feature size.
    """
    h, w = frame.height, frame.width
    if feature_size is None:
        feature_size = min(h, w)
    if h % feature_size or w % feature_size:
        raise ValueError(
            f"canvas {w}x{h} not divisible by feature size {feature_size}"
        )
    sy, sx = h // feature_size, w // feature_size
    rgb = frame.pixels.astype(np.float64) / 255.0
    # box average over sy x sx blocks, one channel at a time
    blocks = rgb.reshape(feature_size, sy, feature_size, sx, 3)
    pooled = blocks.mean(axis=(1, 3)).transpose(2, 0, 1)  # (3, fs, fs)
    ys = (np.arange(feature_size) + 0.5) / feature_size
    xs = (np.arange(feature_size) + 0.5) / feature_size
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    values = np.concatenate([pooled, cx[None], cy[None]], axis=0)
    return FeatureMap(frame.id, values, "toy-encoder", canvas_w=w, canvas_h=h)


class ToyFeatureProvider:
    """Computes (and caches) toy-encoder features for every manifest image."""

    def __init__(self, manifest: Manifest, feature_size: int | None = None):
        self._frames = {rec.frame.id: rec.frame for rec in manifest.images}
        self._feature_size = feature_size
        self._cache: dict[str, FeatureMap] = {}

    def get(self, image_id: str) -> FeatureMap | None:
        if image_id not in self._frames:
            return None
        if image_id not in self._cache:
            self._cache[image_id] = toy_encode(
                self._frames[image_id], self._feature_size
            )
        return self._cache[image_id]


class FeatDirProvider:
    """Serves feature maps from a directory of <image_id>.feat files."""

    def __init__(self, directory, manifest: Manifest | None = None):
        self._dir = os.fspath(directory)
        self._canvas = {}
        if manifest is not None:
            self._canvas = {
                rec.frame.id: (rec.frame.width, rec.frame.height)
                for rec in manifest.images
            }

    def get(self, image_id: str) -> FeatureMap | None:
        path = os.path.join(self._dir, f"{image_id}.feat")
        if not os.path.exists(path):
            return None
        values = read_feat(path)
        if values.ndim != 3:
            raise SegkitError(f"{path}: expected rank-3 tensor, got {values.ndim}")
        w, h = self._canvas.get(image_id, (None, None))
        return FeatureMap(image_id, values, "bridge-export", canvas_w=w, canvas_h=h)

"""Toy point-conditioned mask head with a classifier, trained by hand.

The head scores each feature cell with a bilinear form between the cell
feature and the prompt-point feature, plus one scalar offset per output
candidate (three candidates, mirroring a multi-output mask decoder). A
small linear map over pooled logit statistics produces per-candidate
predicted-IoU scores, and a linear classifier over mask-pooled features
predicts the object label.

Gradients are derived analytically (no autodiff); the optimizer is a
decoupled-weight-decay adaptive method with a cosine learning-rate decay.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .confidence import FeatureMap, downsample_mask
from .data import InstanceMask, Manifest
from .errors import SegkitError
from .grid import Assignment
from .losses import cross_entropy, dice_loss, focal_loss
from .tensorio import atomic_write_text, read_sections, write_sections
from .validation import check_point_in_canvas

NUM_CANDIDATES = 3


@dataclass
class MaskCandidate:
    """One predicted mask with its confidence score."""

    mask: np.ndarray  # (H, W) bool, mask = logits > 0
    logits: np.ndarray  # (H, W) float
    predicted_iou: float
    prompt_point: tuple[float, float]
    label_logits: np.ndarray | None = None

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass
class HeadParams:
    bilinear: np.ndarray  # (C, C)
    candidate_offsets: np.ndarray  # (3,)
    iou_weights: np.ndarray  # (3, 2): per-candidate row over (mean positive logit, foreground fraction)
    iou_bias: np.ndarray  # (3,)
    class_weights: np.ndarray  # (L, C)
    class_bias: np.ndarray  # (L,)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "bilinear": self.bilinear,
            "candidate_offsets": self.candidate_offsets,
            "iou_weights": self.iou_weights,
            "iou_bias": self.iou_bias,
            "class_weights": self.class_weights,
            "class_bias": self.class_bias,
        }

    @classmethod
    def from_dict(cls, tensors: dict[str, np.ndarray]) -> "HeadParams":
        try:
            return cls(
                np.asarray(tensors["bilinear"], dtype=np.float64),
                np.asarray(tensors["candidate_offsets"], dtype=np.float64),
                np.asarray(tensors["iou_weights"], dtype=np.float64),
                np.asarray(tensors["iou_bias"], dtype=np.float64),
                np.asarray(tensors["class_weights"], dtype=np.float64),
                np.asarray(tensors["class_bias"], dtype=np.float64),
            )
        except KeyError as exc:
            raise SegkitError(f"checkpoint missing section {exc}") from exc

    @classmethod
    def init(cls, channels: int, num_classes: int, rng) -> "HeadParams":
        # distinct candidate offsets so the three outputs start nested
        return cls(
            bilinear=rng.normal(0.0, 0.1, size=(channels, channels)),
            candidate_offsets=np.array([0.0, -0.5, 0.5]),
            iou_weights=np.zeros((NUM_CANDIDATES, 2)),
            iou_bias=np.zeros(NUM_CANDIDATES),
            class_weights=np.zeros((num_classes, channels)),
            class_bias=np.zeros(num_classes),
        )

    def save(self, path) -> None:
        write_sections(path, self.as_dict())

    @classmethod
    def load(cls, path) -> "HeadParams":
        return cls.from_dict(read_sections(path))


@dataclass
class TrainLog:
    # rows of (epoch, mean_ce, mean_focal, mean_dice, mean_total, learning_rate)
    rows: list[tuple] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.rows[0][4]

    @property
    def final_loss(self) -> float:
        return self.rows[-1][4]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["epoch", "mean_ce", "mean_focal", "mean_dice", "mean_total", "learning_rate"]
        )
        for row in self.rows:
            writer.writerow(
                [row[0]] + [f"{v:.10g}" for v in row[1:]]
            )
        return buf.getvalue()

    def save(self, path) -> None:
        atomic_write_text(path, self.to_csv())


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _canvas_dims(features: FeatureMap) -> tuple[int, int]:
    w = features.canvas_w if features.canvas_w else features.fw
    h = features.canvas_h if features.canvas_h else features.fh
    return w, h


def _point_to_cell(x, y, features: FeatureMap) -> tuple[int, int]:
    w, h = _canvas_dims(features)
    col = min(int(x * features.fw / w), features.fw - 1)
    row = min(int(y * features.fh / h), features.fh - 1)
    return row, col


def upsample_nearest(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    fh, fw = arr.shape
    rows = np.minimum((np.arange(height) * fh // height), fh - 1)
    cols = np.minimum((np.arange(width) * fw // width), fw - 1)
    return arr[np.ix_(rows, cols)]


def _candidate_stats(z: np.ndarray) -> np.ndarray:
    pos = z > 0
    mean_pos = z[pos].mean() if pos.any() else 0.0
    return np.array([mean_pos, pos.mean()])


def predict_candidates(
    params: HeadParams, features: FeatureMap, point
) -> list[MaskCandidate]:
    """Exactly three candidates for one prompt point, deterministic."""
    w, h = _canvas_dims(features)
    x, y = check_point_in_canvas(point, w, h)
    row, col = _point_to_cell(x, y, features)
    g = features.values[:, row, col]
    flat = features.values.reshape(features.channels, -1)
    base = flat.T @ (params.bilinear @ g)

    candidates = []
    pooled_cache = []
    for k in range(NUM_CANDIDATES):
        z = base + params.candidate_offsets[k]
        stats = _candidate_stats(z)
        piou = float(
            _sigmoid(np.array([params.iou_weights[k] @ stats + params.iou_bias[k]]))[0]
        )
        logits_feat = z.reshape(features.fh, features.fw)
        logits = upsample_nearest(logits_feat, h, w)
        pos = z > 0
        pooled_cache.append(flat[:, pos].mean(axis=1) if pos.any() else np.zeros(features.channels))
        candidates.append(
            MaskCandidate(logits > 0, logits, piou, (x, y), None)
        )
    # label logits are shared: pooled over the most confident candidate's mask
    best = max(range(NUM_CANDIDATES), key=lambda k: (candidates[k].predicted_iou, -k))
    label_logits = params.class_weights @ pooled_cache[best] + params.class_bias
    for cand in candidates:
        cand.label_logits = label_logits
    return candidates


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return float(inter / union) if union else 0.0


def select_best_candidate(candidates: list[MaskCandidate], gt: InstanceMask) -> int:
    """Index of the candidate with highest IoU against gt; ties -> lowest."""
    if not candidates:
        raise ValueError("empty candidate list")
    ious = [mask_iou(c.mask, gt.mask) for c in candidates]
    return int(np.argmax(ious))


def classify(params: HeadParams, features: FeatureMap, candidate: MaskCandidate) -> int:
    """Argmax class from features pooled over the candidate mask.

    An empty mask pools to zeros and falls through to the bias tie-break.
    """
    ds = downsample_mask(candidate.mask, features.fh, features.fw)
    flat = features.values.reshape(features.channels, -1)
    pooled = flat[:, ds.ravel()].mean(axis=1) if ds.any() else np.zeros(features.channels)
    logits = params.class_weights @ pooled + params.class_bias
    return int(np.argmax(logits))


class _AdamW:
    """Decoupled-weight-decay adaptive optimizer over a dict of arrays."""

    def __init__(self, arrays, beta1=0.9, beta2=0.999, weight_decay=0.01, eps=1e-8):
        self.beta1, self.beta2 = beta1, beta2
        self.weight_decay, self.eps = weight_decay, eps
        self.m = {k: np.zeros_like(a) for k, a in arrays.items()}
        self.v = {k: np.zeros_like(a) for k, a in arrays.items()}
        self.t = 0

    def step(self, arrays, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for key, theta in arrays.items():
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            update = (self.m[key] / c1) / (np.sqrt(self.v[key] / c2) + self.eps)
            theta -= lr * (update + self.weight_decay * theta)


class PointPromptSegmenter(BaseEstimator):
    """Trainable toy mask head with a scikit-learn style interface.

    Parameters mirror the training configuration: cosine-decayed learning
    rate, adaptive optimizer with decoupled weight decay, and the
    (cross-entropy, focal, dice) loss weights.
    """

    def __init__(
        self,
        learning_rate: float = 1e-3,
        epochs: int = 200,
        beta1: float = 0.9,
        beta2: float = 0.999,
        weight_decay: float = 0.01,
        loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
        focal_alpha: float = 0.25,
        focal_gamma: float = 2.0,
        seed: int = 0,
    ):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.loss_weights = loss_weights
        self.focal_alpha = focal_alpha
        self.focal_gamma = focal_gamma
        self.seed = seed

    def fit(self, manifest: Manifest, assignments: list[Assignment], features):
        """Iterate (image, mask, label) pairs and refine the head per pair."""
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        by_instance = {a.instance_id: a for a in assignments}
        samples = []
        for rec in manifest.images:
            fmap = features.get(rec.frame.id)
            if fmap is None:
                raise SegkitError(f"no feature map for image {rec.frame.id}")
            for mask in rec.masks:
                if mask.instance_id not in by_instance:
                    raise SegkitError(
                        f"no assignment for instance {mask.instance_id}"
                    )
                samples.append((fmap, mask, by_instance[mask.instance_id]))
        if not samples:
            raise SegkitError("manifest has no masks to train on")

        channels = samples[0][0].channels
        num_classes = len(manifest.class_table)
        rng = np.random.default_rng(self.seed)
        params = HeadParams.init(channels, num_classes, rng)
        arrays = params.as_dict()
        optimizer = _AdamW(arrays, self.beta1, self.beta2, self.weight_decay)
        log = TrainLog()

        for epoch in range(self.epochs):
            lr = self.learning_rate * 0.5 * (1.0 + np.cos(np.pi * epoch / self.epochs))
            order = rng.permutation(len(samples))
            sums = np.zeros(4)  # ce, focal, dice, total
            for idx in order:
                fmap, mask, assignment = samples[idx]
                label_idx = manifest.class_table.index_of(mask.label)
                losses = self._train_step(
                    params, optimizer, arrays, fmap, mask, label_idx, assignment, lr
                )
                sums += losses
            means = sums / len(samples)
            log.rows.append((epoch, means[0], means[1], means[2], means[3], lr))

        self.params_ = params
        self.train_log_ = log
        self.num_classes_ = num_classes
        return self

    def _train_step(self, params, optimizer, arrays, fmap, mask, label_idx, assignment, lr):
        w_ce, w_focal, w_dice = self.loss_weights
        flat = fmap.values.reshape(fmap.channels, -1)
        row, col = _point_to_cell(*assignment.grid_point, fmap)
        g = fmap.values[:, row, col]
        base = flat.T @ (params.bilinear @ g)

        gt_ds = downsample_mask(mask.mask, fmap.fh, fmap.fw).ravel().astype(np.float64)
        # best-of-3 selection uses calculated IoU against ground truth
        feat_masks = [base + params.candidate_offsets[k] > 0 for k in range(NUM_CANDIDATES)]
        ious = np.array(
            [mask_iou(m, gt_ds > 0.5) for m in feat_masks]
        )
        k_best = int(np.argmax(ious))

        z = base + params.candidate_offsets[k_best]
        p = _sigmoid(z)
        focal_val, focal_grad = focal_loss(p, gt_ds, self.focal_alpha, self.focal_gamma)
        dice_val, dice_grad = dice_loss(p, gt_ds)
        dz = (w_focal * focal_grad + w_dice * dice_grad) * p * (1.0 - p)

        grads = {key: np.zeros_like(a) for key, a in arrays.items()}
        grads["bilinear"] = np.outer(flat @ dz, g)
        grads["candidate_offsets"][k_best] = dz.sum()

        # classifier trains on features pooled over the ground-truth mask
        pos = gt_ds > 0.5
        q = flat[:, pos].mean(axis=1) if pos.any() else np.zeros(fmap.channels)
        logits = params.class_weights @ q + params.class_bias
        ce_val, ce_grad = cross_entropy(logits, label_idx)
        grads["class_weights"] = w_ce * np.outer(ce_grad, q)
        grads["class_bias"] = w_ce * ce_grad

        # predicted-IoU head regresses toward calculated IoU; the pooled
        # logit statistics are treated as constants so mask parameters stay
        # tied to the focal/dice path only
        for k in range(NUM_CANDIDATES):
            zk = base + params.candidate_offsets[k]
            stats = _candidate_stats(zk)
            pred = _sigmoid(np.array([params.iou_weights[k] @ stats + params.iou_bias[k]]))[0]
            dpred = 2.0 * (pred - ious[k]) / NUM_CANDIDATES * pred * (1.0 - pred)
            grads["iou_weights"][k] += dpred * stats
            grads["iou_bias"][k] += dpred

        optimizer.step(arrays, grads, lr)
        total = w_ce * ce_val + w_focal * focal_val + w_dice * dice_val
        return np.array([ce_val, focal_val, dice_val, total])

    def predict_candidates(self, features: FeatureMap, point) -> list[MaskCandidate]:
        self._check_fitted()
        return predict_candidates(self.params_, features, point)

    def classify(self, features: FeatureMap, candidate: MaskCandidate) -> int:
        self._check_fitted()
        return classify(self.params_, features, candidate)

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise SegkitError("estimator is not fitted; call fit() first")

import itertools
import json

import numpy as np
import pytest

from segkit.confidence import FeatureMap
from segkit.data import InstanceMask
from segkit.grid import build_grid
from segkit.head import MaskCandidate
from segkit.metrics import (
    ClassStats,
    EvalReport,
    InstanceEval,
    classification_accuracy,
    instance_iou_acc,
    per_class_aggregate,
    pixel_iou_acc,
    render_report,
)


def oracle_iou_acc(pred, gt):
    """Pixel counting with explicit loops, no vectorization shortcuts."""
    inter = union = gt_area = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            p, g = bool(pred[i, j]), bool(gt[i, j])
            inter += p and g
            union += p or g
            gt_area += g
    iou = inter / union if union else 0.0
    acc = inter / gt_area if gt_area else 0.0
    return iou, acc


def planted_features(mask, size, canvas):
    """Features whose confidence argmax lands inside the mask region."""
    from segkit.confidence import downsample_mask

    ds = downsample_mask(mask, size, size)
    values = np.zeros((2, size, size))
    values[0] = 1.0
    values[1][ds] = 10.0
    return FeatureMap("img", values, canvas_w=canvas, canvas_h=canvas)


def eval_row(label, iou=0.5, acc=0.6, predicted=None, matched=True, iid="i"):
    return InstanceEval(iid, label, iou, acc, predicted, matched)


class TestPixelIoUAcc:
    def test_identity(self):
        gt = np.eye(8, dtype=bool)
        assert pixel_iou_acc(gt, gt) == (1.0, 1.0)

    def test_half_subset(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[:, :10] = True  # |G| = 100
        pred = np.zeros((10, 10), dtype=bool)
        pred[:5] = True  # |P| = 50, P subset of G
        iou, acc = pixel_iou_acc(pred, gt)
        assert iou == pytest.approx(0.5)
        assert acc == pytest.approx(0.5)

    def test_superset(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[:5] = True  # |G| = 50
        pred = np.ones((10, 10), dtype=bool)  # |P| = 100, P superset of G
        iou, acc = pixel_iou_acc(pred, gt)
        assert iou == pytest.approx(0.5)
        assert acc == pytest.approx(1.0)

    def test_pixel_accuracy_variant(self):
        gt = np.zeros((2, 2), dtype=bool)
        gt[0, 0] = True
        pred = np.zeros((2, 2), dtype=bool)
        pred[0, 1] = True
        _, acc = pixel_iou_acc(pred, gt, acc="pixel")
        assert acc == pytest.approx(0.5)
        with pytest.raises(ValueError, match="unknown accuracy"):
            pixel_iou_acc(pred, gt, acc="dice")

    def test_exhaustive_3x3_against_oracle(self):
        # every (pred, gt) pair of 3x3 masks, gt non-empty: 512 * 511 pairs
        shapes = [
            np.array([(n >> k) & 1 for k in range(9)], dtype=bool).reshape(3, 3)
            for n in range(512)
        ]
        for gt in shapes:
            if not gt.any():
                continue
            for pred in shapes:
                iou, acc = pixel_iou_acc(pred, gt)
                o_iou, o_acc = oracle_iou_acc(pred, gt)
                assert iou == o_iou and acc == o_acc
                assert acc >= iou

    def test_exhaustive_rectangle_pairs_6x6(self):
        # all axis-aligned rectangle pairs on a 6x6 canvas
        rects = []
        for y0, y1 in itertools.combinations(range(7), 2):
            for x0, x1 in itertools.combinations(range(7), 2):
                mask = np.zeros((6, 6), dtype=bool)
                mask[y0:y1, x0:x1] = True
                rects.append(mask)
        for gt in rects:
            for pred in rects:
                assert pixel_iou_acc(pred, gt) == oracle_iou_acc(pred, gt)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_64x64_against_oracle(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(20):
            pred = rng.random((64, 64)) > rng.uniform(0.3, 0.9)
            gt = rng.random((64, 64)) > rng.uniform(0.3, 0.9)
            iou, acc = pixel_iou_acc(pred, gt)
            o_iou, o_acc = oracle_iou_acc(pred, gt)
            assert iou == pytest.approx(o_iou, abs=0)
            assert acc == pytest.approx(o_acc, abs=0)
            assert acc >= iou


class TestInstanceEval:
    def setup_method(self):
        self.canvas = 32
        self.grid = build_grid(4, self.canvas, self.canvas)
        gt = np.zeros((self.canvas, self.canvas), dtype=bool)
        gt[2:10, 2:10] = True
        self.gt = InstanceMask(gt, "Mug", "i0")
        self.features = planted_features(gt, 8, self.canvas)
        # the planted argmax maps into the upper-left grid cell (4, 4)
        self.point = (4.0, 4.0)

    def prediction(self, mask, piou=0.9, point=None):
        mask = np.asarray(mask, dtype=bool)
        return MaskCandidate(
            mask, np.where(mask, 1.0, -1.0), piou, point or self.point
        )

    def test_perfect_prediction(self):
        out = instance_iou_acc(
            self.gt, [self.prediction(self.gt.mask)], self.grid, self.features
        )
        assert out.matched
        assert out.iou == 1.0 and out.acc == 1.0

    def test_no_prediction_at_point_scores_zero(self):
        far = self.prediction(self.gt.mask, point=(28.0, 28.0))
        out = instance_iou_acc(self.gt, [far], self.grid, self.features)
        assert not out.matched
        assert out.iou == 0.0 and out.acc == 0.0
        assert out.predicted_label is None

    def test_most_confident_selected(self):
        half = self.gt.mask.copy()
        half[:, 6:] = False
        best = self.prediction(self.gt.mask, piou=0.9)
        worse = self.prediction(half, piou=0.8)
        out = instance_iou_acc(self.gt, [worse, best], self.grid, self.features)
        assert out.iou == 1.0  # the 0.9 candidate wins regardless of order
        out = instance_iou_acc(self.gt, [best, worse], self.grid, self.features)
        assert out.iou == 1.0

    def test_confidence_tie_prefers_earlier_prediction(self):
        half = self.gt.mask.copy()
        half[:, 6:] = False
        a = self.prediction(half, piou=0.9)
        b = self.prediction(self.gt.mask, piou=0.9)
        out = instance_iou_acc(self.gt, [a, b], self.grid, self.features)
        assert out.iou < 1.0


class TestClassificationAccuracy:
    def test_all_correct(self):
        evals = [eval_row("Mug", predicted="Mug") for _ in range(3)]
        per_class, mean = classification_accuracy(evals)
        assert per_class == {"Mug": 1.0}
        assert mean == 1.0

    def test_unmatched_counts_as_incorrect(self):
        evals = [
            eval_row("Mug", predicted="Mug"),
            eval_row("Mug", predicted=None, matched=False, iou=0, acc=0),
        ]
        per_class, _ = classification_accuracy(evals)
        assert per_class["Mug"] == 0.5

    def test_no_matches_in_class(self):
        evals = [eval_row("Sofa", predicted=None, matched=False, iou=0, acc=0)]
        per_class, mean = classification_accuracy(evals)
        assert per_class == {"Sofa": 0.0}
        assert mean == 0.0


class TestAggregate:
    def test_single_class_mean(self):
        evals = [eval_row("Mug", iou=0.2), eval_row("Mug", iou=0.6)]
        report = per_class_aggregate(evals)
        assert report.per_class["Mug"].iou == pytest.approx(0.4)
        assert report.miou == pytest.approx(0.4)

    def test_unweighted_class_means(self):
        evals = [eval_row("Mug", iou=0.2) for _ in range(9)]
        evals.append(eval_row("Sofa", iou=0.8))
        report = per_class_aggregate(evals)
        assert report.miou == pytest.approx(0.5)  # not instance-weighted

    def test_empty_input(self):
        report = per_class_aggregate([])
        assert report.per_class == {}
        assert report.miou == 0.0 and report.macc == 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        evals = [
            eval_row(label, iou=float(rng.random()), acc=float(rng.random()),
                     predicted=label if rng.random() > 0.5 else "Other",
                     iid=f"i{n}")
            for n, label in enumerate(["Mug", "Sofa", "Mug", "Fridge", "Sofa"])
        ]
        base = per_class_aggregate(evals).to_json()
        for perm in itertools.permutations(evals):
            assert per_class_aggregate(list(perm)).to_json() == base

    def test_json_roundtrip(self):
        report = per_class_aggregate(
            [eval_row("Mug", predicted="Mug"), eval_row("Sofa", predicted="Mug")]
        )
        doc = json.loads(json.dumps(report.to_json()))
        restored = EvalReport.from_json(doc)
        assert restored.to_json() == report.to_json()


class TestRender:
    def test_reference_style_row(self):
        report = EvalReport(
            per_class={"GarbageCan": ClassStats(12, 0.7986, 0.914, 0.67)},
            miou=0.7986, macc=0.914, mean_cls_acc=0.67,
        )
        text = render_report(report)
        assert "GarbageCan" in text
        assert "0.7986" in text
        assert "0.9140" in text
        assert "0.6700" in text

    def test_baseline_deltas_zero(self):
        report = EvalReport(
            per_class={"Mug": ClassStats(2, 0.5, 0.6, 1.0)},
            miou=0.5, macc=0.6, mean_cls_acc=1.0,
        )
        text = render_report(report, baseline=report)
        assert "+0.0000" in text
        assert "-0.0" not in text

    def test_single_class_layout(self):
        report = EvalReport(
            per_class={"Mug": ClassStats(2, 0.5, 0.6, 1.0)},
            miou=0.5, macc=0.6, mean_cls_acc=1.0,
        )
        lines = render_report(report).split("\n")
        assert lines[0].startswith("class")
        assert lines[2].startswith("Mug")
        assert lines[-1].startswith("mean")

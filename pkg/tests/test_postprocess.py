import numpy as np
import pytest

from segkit.head import MaskCandidate
from segkit.postprocess import (
    FilterConfig,
    MaskCountReport,
    box_iou,
    box_nms,
    clean_regions,
    count_masks,
    mask_to_box,
    run_pipeline,
    threshold_by_pred_iou,
)


def cand(mask, piou=0.9):
    mask = np.asarray(mask, dtype=bool)
    return MaskCandidate(mask, np.where(mask, 1.0, -1.0), piou, (0.0, 0.0))


def box_mask(x0, y0, x1, y1, side=64):
    mask = np.zeros((side, side), dtype=bool)
    mask[y0:y1, x0:x1] = True
    return mask


class TestFilterConfig:
    def test_defaults(self):
        config = FilterConfig()
        assert config.pred_iou_threshold == 0.3
        assert config.box_iou_cutoff == 0.3
        assert config.min_region_area == 150

    def test_validation(self):
        with pytest.raises(ValueError):
            FilterConfig(pred_iou_threshold=1.5)
        with pytest.raises(ValueError):
            FilterConfig(min_region_area=-1)


class TestThreshold:
    def test_ge_comparison(self):
        candidates = [cand(box_mask(0, 0, 4, 4), p) for p in (0.2, 0.3, 0.9)]
        out = threshold_by_pred_iou(candidates, 0.3)
        assert [c.predicted_iou for c in out] == [0.3, 0.9]

    def test_zero_threshold_keeps_all(self):
        candidates = [cand(box_mask(0, 0, 4, 4), p) for p in (0.0, 0.5)]
        assert len(threshold_by_pred_iou(candidates, 0.0)) == 2

    def test_empty_input(self):
        assert threshold_by_pred_iou([], 0.3) == []


class TestBoxes:
    def test_tight_box(self):
        assert mask_to_box(box_mask(3, 5, 10, 12)) == (3, 5, 10, 12)

    def test_box_iou_hand_case(self):
        # [0,0,10,10] vs [5,0,15,10]: inter 50, union 150
        assert box_iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)

    def test_box_iou_disjoint(self):
        assert box_iou((0, 0, 4, 4), (10, 10, 12, 12)) == 0.0


class TestBoxNMS:
    def test_identical_boxes_keep_higher_score(self):
        a = cand(box_mask(0, 0, 10, 10), 0.9)
        b = cand(box_mask(0, 0, 10, 10), 0.8)
        out = box_nms([b, a], 0.5)
        assert out == [a]

    def test_disjoint_boxes_survive(self):
        a = cand(box_mask(0, 0, 10, 10), 0.9)
        b = cand(box_mask(30, 30, 40, 40), 0.8)
        assert len(box_nms([a, b], 0.3)) == 2

    def test_boundary_iou_suppressed(self):
        # box IoU 1/3 >= cutoff 0.3 suppresses the lower-scored box
        a = cand(box_mask(0, 0, 10, 10), 0.9)
        b = cand(box_mask(5, 0, 15, 10), 0.8)
        out = box_nms([a, b], 0.3)
        assert out == [a]
        # with cutoff just above 1/3 both survive
        assert len(box_nms([a, b], 0.34)) == 2

    def test_kept_pairs_below_cutoff(self):
        rng = np.random.default_rng(0)
        candidates = []
        for _ in range(40):
            x0, y0 = rng.integers(0, 50, size=2)
            w, h = rng.integers(2, 14, size=2)
            candidates.append(
                cand(box_mask(x0, y0, x0 + w, y0 + h), float(rng.random()))
            )
        kept = box_nms(candidates, 0.3)
        boxes = [mask_to_box(c.mask) for c in kept]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                assert box_iou(boxes[i], boxes[j]) < 0.3

    def test_score_tie_prefers_larger_area(self):
        small = cand(box_mask(0, 0, 5, 5), 0.5)
        big = cand(box_mask(0, 0, 10, 10), 0.5)
        out = box_nms([small, big], 0.2)
        assert out[0] is big


class TestCleanRegions:
    def test_small_island_removed(self):
        mask = box_mask(0, 0, 20, 10)  # 200 px blob
        mask |= box_mask(40, 40, 50, 50)  # 100 px island
        out = clean_regions(mask, 150)
        assert out[:10, :20].all()
        assert not out[40:50, 40:50].any()

    def test_small_hole_filled(self):
        mask = box_mask(0, 0, 30, 30)
        mask[5:15, 5:15] = False  # 100 px hole
        out = clean_regions(mask, 150)
        assert out[:30, :30].all()
        assert out.sum() == 900

    def test_exact_min_area_kept(self):
        mask = box_mask(0, 0, 15, 10)  # exactly 150 px
        out = clean_regions(mask, 150)
        np.testing.assert_array_equal(out, mask)

    def test_border_background_never_filled(self):
        # small background region touching the border is not a hole
        mask = np.ones((20, 20), dtype=bool)
        mask[0:3, 0:3] = False
        out = clean_regions(mask, 150)
        assert not out[0, 0]

    def test_eight_connectivity(self):
        # two diagonal pixels form one 8-connected component of area 2
        mask = np.zeros((10, 10), dtype=bool)
        mask[2, 2] = mask[3, 3] = True
        assert not clean_regions(mask, 3).any()
        assert clean_regions(mask, 2).sum() == 2

    @pytest.mark.parametrize("seed", range(10))
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        mask = rng.random((48, 48)) > 0.55
        once = clean_regions(mask, 30)
        twice = clean_regions(once, 30)
        np.testing.assert_array_equal(once, twice)


class TestRunPipeline:
    def test_empty_input(self):
        assert run_pipeline([], FilterConfig()) == []

    def test_clean_candidate_passes(self):
        candidate = cand(box_mask(10, 10, 30, 30), 0.9)
        out = run_pipeline([candidate], FilterConfig())
        assert len(out) == 1
        np.testing.assert_array_equal(out[0].mask, candidate.mask)

    def test_noop_settings_keep_everything(self):
        # cutoff 1.0 still suppresses exact duplicate boxes (IoU = 1.0 >=
        # cutoff), so a no-op run needs candidates with distinct boxes
        candidates = [
            cand(box_mask(0, 0, 10, 10), 0.1),
            cand(box_mask(0, 0, 11, 10), 0.2),
            cand(box_mask(5, 5, 20, 20), 0.3),
        ]
        out = run_pipeline(candidates, FilterConfig(0.0, 1.0, 0))
        assert len(out) == 3

    def test_stages_non_increasing(self):
        rng = np.random.default_rng(1)
        candidates = [
            cand(rng.random((64, 64)) > 0.8, float(rng.random()))
            for _ in range(20)
        ]
        config = FilterConfig()
        thresholded = threshold_by_pred_iou(candidates, config.pred_iou_threshold)
        out = run_pipeline(candidates, config)
        assert len(out) <= len(thresholded) <= len(candidates)

    def test_hand_traced_ten_candidate_oracle(self):
        """Trace of the four stages on ten constructed candidates.

        Stage 1 (pred-IoU >= 0.3): drops c0 (0.2) and c1 (0.29).
        Stage 2 (drop empties): drops c2 (all-background mask).
        Stage 3 (cleanup, min area 150): c3 loses its 100-px island but
          keeps its 400-px body; c4 is a lone 100-px blob and is dropped
          entirely; c5 has its 49-px hole filled.
        Stage 4 (NMS, cutoff 0.3): order by score is c9 (0.95), c6 (0.9),
          c5 (0.8), c7 (0.7), c3 (0.6), c8 (0.5). c9 and c6 are disjoint;
          c5's box equals c6's box (IoU 1.0) -> suppressed; c7 is disjoint
          from all kept; c3's box equals c9's box -> suppressed; c8's box
          overlaps c7's box with IoU 200/600 = 1/3 >= 0.3 -> suppressed.
        Survivors: c9, c6, c7.
        """
        c0 = cand(box_mask(0, 0, 20, 20), 0.20)
        c1 = cand(box_mask(0, 0, 20, 20), 0.29)
        c2 = cand(np.zeros((64, 64), dtype=bool), 0.9)

        body_plus_island = box_mask(0, 0, 20, 20)  # 400 px body
        body_plus_island |= box_mask(50, 50, 60, 60)  # 100 px island
        c3 = cand(body_plus_island, 0.60)

        c4 = cand(box_mask(30, 0, 40, 10), 0.9)  # 100 px, vanishes in cleanup

        holed = box_mask(30, 30, 50, 50)  # 400 px
        holed[37:44, 37:44] = False  # 49 px hole
        c5 = cand(holed, 0.80)

        c6 = cand(box_mask(30, 30, 50, 50), 0.90)
        c7 = cand(box_mask(0, 40, 20, 60), 0.70)
        c8 = cand(box_mask(10, 40, 30, 60), 0.50)
        c9 = cand(box_mask(0, 0, 20, 20), 0.95)

        out = run_pipeline([c0, c1, c2, c3, c4, c5, c6, c7, c8, c9],
                           FilterConfig(0.3, 0.3, 150))
        assert [c.predicted_iou for c in out] == [0.95, 0.90, 0.70]
        # c9 and c6 pass through cleanup untouched
        np.testing.assert_array_equal(out[0].mask, c9.mask)
        np.testing.assert_array_equal(out[1].mask, c6.mask)


class TestCounting:
    def test_total(self):
        report = count_masks({"a": [1, 2], "b": [], "c": [1, 2, 3, 4, 5]})
        assert report.total == 7
        assert report.per_image == {"a": 2, "b": 0, "c": 5}
        assert report.per_image_mean == pytest.approx(7 / 3)

    def test_empty(self):
        report = count_masks({})
        assert report.total == 0
        assert report.per_image_mean == 0.0

    def test_pipeline_comparison_render(self):
        report = MaskCountReport(
            per_image={"img": 5},
            pipelines={"vanilla": 168691, "semantic": 66280, "filtered": 31015},
        )
        text = report.render()
        assert "168691" in text
        assert "66280" in text
        assert "31015" in text
        assert text.index("vanilla") < text.index("filtered")

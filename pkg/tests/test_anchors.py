import math

import numpy as np
import pytest

from charmine.detector.anchors import (
    AnchorConfig,
    AnchorLevel,
    DefaultAnchor,
    anchor_array,
    center_to_corner,
    decode,
    decode_array,
    encode,
    encode_array,
    generate_anchors,
    match_anchors,
)
from charmine.errors import ValidationError
from charmine.geometry import BBox, iou


def level(f, scales=(0.5,), ratios=(1.0,)):
    return AnchorLevel(f, scales, ratios)


class TestAnchorConfig:
    def test_sizes_must_strictly_decrease(self):
        AnchorConfig((level(4), level(2)))
        with pytest.raises(ValidationError):
            AnchorConfig((level(2), level(4)))
        with pytest.raises(ValidationError):
            AnchorConfig((level(4), level(4)))

    def test_scale_bounds(self):
        with pytest.raises(ValidationError):
            AnchorConfig((level(2, scales=(1.5,)),))

    def test_needs_a_level(self):
        with pytest.raises(ValidationError):
            AnchorConfig(())


class TestGenerateAnchors:
    def test_single_cell(self):
        anchors = generate_anchors(AnchorConfig((level(1),)))
        assert anchors == [DefaultAnchor(0.5, 0.5, 0.5, 0.5)]

    def test_two_by_two_grid(self):
        anchors = generate_anchors(AnchorConfig((level(2),)))
        centers = {(a.cx, a.cy) for a in anchors}
        assert centers == {(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)}
        assert len(anchors) == 4

    def test_count_across_levels_and_ratios(self):
        config = AnchorConfig((level(4, ratios=(1.0, 0.5)), level(2, ratios=(1.0, 0.5))))
        anchors = generate_anchors(config)
        assert len(anchors) == 16 * 2 + 4 * 2 == 40
        assert config.total_anchors == 40

    def test_canonical_order_row_major_ratio_minor(self):
        config = AnchorConfig((level(2, scales=(0.4, 0.6), ratios=(1.0, 0.5)),))
        anchors = generate_anchors(config)
        # scale-major: first 8 anchors all scale 0.4
        assert all(math.isclose(a.w * a.h, 0.4 * 0.4, rel_tol=1e-9) for a in anchors[:8])
        # within a scale: row-major cells, ratios innermost
        assert [(a.cx, a.cy) for a in anchors[:4]] == [(0.25, 0.25), (0.25, 0.25),
                                                       (0.75, 0.25), (0.75, 0.25)]

    def test_ratio_preserves_area(self):
        (a,) = generate_anchors(AnchorConfig((level(1, scales=(0.3,), ratios=(2.0,)),)))
        assert a.w / a.h == pytest.approx(2.0)
        assert a.w * a.h == pytest.approx(0.09)


class TestEncodeDecode:
    def test_identity(self):
        a = DefaultAnchor(0.5, 0.5, 0.2, 0.3)
        gt = BBox.from_center(0.5, 0.5, 0.2, 0.3)
        assert encode(gt, a) == pytest.approx((0, 0, 0, 0), abs=1e-12)

    def test_shift_by_tenth_of_anchor_width(self):
        a = DefaultAnchor(0.5, 0.5, 0.2, 0.3)
        gt = BBox.from_center(0.5 + 0.1 * a.w, 0.5, 0.2, 0.3)
        assert encode(gt, a) == pytest.approx((0.1, 0, 0, 0), abs=1e-12)

    def test_round_trip_thousand_random_pairs(self):
        rng = np.random.default_rng(21)
        worst = 0.0
        for _ in range(1000):
            a = DefaultAnchor(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                              rng.uniform(0.02, 0.9), rng.uniform(0.02, 0.9))
            gt = BBox.from_center(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                                  rng.uniform(0.005, 0.8), rng.uniform(0.005, 0.8))
            back = decode(encode(gt, a), a)
            for got, want in zip(back.to_tuple(), gt.to_tuple()):
                worst = max(worst, abs(got - want) / max(abs(want), 1e-12))
        assert worst < 1e-9

    def test_array_forms_match_scalar(self):
        rng = np.random.default_rng(22)
        anchors = [DefaultAnchor(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                                 rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5))
                   for _ in range(50)]
        gts = [BBox.from_center(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                                rng.uniform(0.02, 0.5), rng.uniform(0.02, 0.5))
               for _ in range(50)]
        anchors_arr = np.array([(a.cx, a.cy, a.w, a.h) for a in anchors])
        gts_arr = np.array([g.to_tuple() for g in gts])
        offs = encode_array(gts_arr, anchors_arr)
        back = decode_array(offs, anchors_arr)
        for i, (a, g) in enumerate(zip(anchors, gts)):
            assert offs[i] == pytest.approx(encode(g, a), abs=1e-12)
            assert tuple(back[i]) == pytest.approx(g.to_tuple(), abs=1e-9)

    def test_degenerate_gt_rejected(self):
        a = DefaultAnchor(0.5, 0.5, 0.2, 0.2)
        with pytest.raises(ValidationError):
            encode(BBox(0.5, 0.5, 0.5, 0.6), a)  # zero width raises at construction


class TestMatchAnchors:
    def test_no_gt_all_negative(self):
        anchors = anchor_array(AnchorConfig((level(2),)))
        assignment = match_anchors(anchors, [])
        assert (assignment == -1).all()

    def test_identical_anchor_is_positive(self):
        anchors = generate_anchors(AnchorConfig((level(2),)))
        gt = BBox(*anchors[0].to_corner())
        assignment = match_anchors(anchors, [gt])
        assert assignment[0] == 0

    def test_low_iou_gt_still_forced(self):
        anchors = generate_anchors(AnchorConfig((level(2, scales=(0.9,)),)))
        gt = BBox(0.0, 0.0, 0.05, 0.05)  # tiny corner box, IoU << 0.5 everywhere
        corners = [BBox(*a.to_corner()) for a in anchors]
        best = max(iou(c, gt) for c in corners)
        assert best < 0.5
        assignment = match_anchors(anchors, [gt])
        assert (assignment == 0).sum() == 1
        # the forced anchor is the brute-force best-IoU one
        forced = int(np.argmax(assignment == 0))
        assert iou(corners[forced], gt) == pytest.approx(best)

    def test_threshold_positives_match_brute_force(self):
        rng = np.random.default_rng(23)
        config = AnchorConfig((level(4, scales=(0.2, 0.35), ratios=(1.0, 0.6)),))
        anchors = generate_anchors(config)
        corners = [BBox(*a.to_corner()) for a in anchors]
        for _ in range(50):
            gts = [BBox.from_center(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                                    rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4))
                   for _ in range(rng.integers(1, 4))]
            assignment = match_anchors(anchor_array(config), gts)
            forced = {int(np.argmax([iou(c, g) for c in corners])) for g in gts}
            for i, c in enumerate(corners):
                ious = [iou(c, g) for g in gts]
                if i in forced:
                    assert assignment[i] >= 0
                elif max(ious) >= 0.5:
                    assert assignment[i] == int(np.argmax(ious))
                else:
                    assert assignment[i] == -1 or i in forced

    def test_center_corner_round_trip(self):
        rng = np.random.default_rng(24)
        arr = rng.uniform(0.1, 0.4, size=(30, 4))
        corner = center_to_corner(arr)
        assert np.allclose(corner[:, 2] - corner[:, 0], arr[:, 2])

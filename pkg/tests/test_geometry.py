import numpy as np
import pytest

from charmine.errors import ValidationError
from charmine.geometry import (
    BBox,
    boxes_to_array,
    directional_intersections,
    iou,
    iou_matrix,
    union_box,
)


def random_box(rng, span=100.0):
    x0, y0 = rng.uniform(0, span, 2)
    w, h = rng.uniform(0.5, span / 2, 2)
    return BBox(x0, y0, x0 + w, y0 + h)


class TestBBox:
    def test_extent_properties(self):
        b = BBox(1.0, 2.0, 4.0, 8.0)
        assert b.width == 3.0
        assert b.height == 6.0
        assert b.area == 18.0
        assert b.center == (2.5, 5.0)

    @pytest.mark.parametrize("corners", [
        (0, 0, 0, 10),    # zero width
        (0, 0, 10, 0),    # zero height
        (5, 0, 2, 10),    # inverted x
        (0, 7, 10, 3),    # inverted y
    ])
    def test_degenerate_rejected(self, corners):
        with pytest.raises(ValidationError):
            BBox(*corners)


class TestIou:
    def test_identical(self):
        a = BBox(0, 0, 10, 10)
        assert iou(a, BBox(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == 0.0

    def test_half_shift(self):
        # inter = 5*10 = 50, union = 100 + 100 - 50 = 150
        assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3)

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            a, b = random_box(rng), random_box(rng)
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0
        assert iou(a, a) == 1.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            dx, dy = rng.uniform(-50, 50, 2)
            assert iou(a.translate(dx, dy), b.translate(dx, dy)) == pytest.approx(iou(a, b))

    def test_positive_iff_both_axes_intersect(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            a, b = random_box(rng), random_box(rng)
            ix, iy = directional_intersections(a, b)
            assert (iou(a, b) > 0) == (ix > 0 and iy > 0)


class TestDirectionalIntersections:
    def test_identity(self):
        a = BBox(0, 0, 10, 10)
        assert directional_intersections(a, a) == (10, 10)

    def test_partial_overlap(self):
        assert directional_intersections(BBox(0, 0, 10, 10), BBox(8, 0, 20, 10)) == (2, 10)

    def test_disjoint(self):
        assert directional_intersections(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == (0, 0)

    def test_containment_gives_full_extent(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            g = random_box(rng)
            # candidate strictly inside g
            mx, my = g.width * 0.2, g.height * 0.2
            c = BBox(g.x_min + mx, g.y_min + my, g.x_max - mx, g.y_max - my)
            ix, iy = directional_intersections(c, g)
            assert ix == pytest.approx(c.width)
            assert iy == pytest.approx(c.height)

    def test_translation_invariance(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            c, g = random_box(rng), random_box(rng)
            dx, dy = rng.uniform(-30, 30, 2)
            moved = directional_intersections(c.translate(dx, dy), g.translate(dx, dy))
            ref = directional_intersections(c, g)
            assert moved[0] == pytest.approx(ref[0])
            assert moved[1] == pytest.approx(ref[1])


class TestArrays:
    def test_union_box(self):
        u = union_box([BBox(0, 0, 2, 2), BBox(1, 1, 5, 3)])
        assert u == BBox(0, 0, 5, 3)
        with pytest.raises(ValidationError):
            union_box([])

    def test_iou_matrix_matches_scalar(self):
        rng = np.random.default_rng(16)
        boxes_a = [random_box(rng) for _ in range(20)]
        boxes_b = [random_box(rng) for _ in range(15)]
        mat = iou_matrix(boxes_to_array(boxes_a), boxes_to_array(boxes_b))
        for i, a in enumerate(boxes_a):
            for j, b in enumerate(boxes_b):
                assert mat[i, j] == pytest.approx(iou(a, b), abs=1e-12)

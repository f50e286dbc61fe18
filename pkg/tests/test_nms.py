import numpy as np
import pytest

from charmine.data import CharCandidate
from charmine.detector.nms import nms, nms_indices
from charmine.errors import ValidationError
from charmine.geometry import BBox, iou


def reference_nms(candidates, threshold):
    """Literal greedy suppression over scalar IoU, pair by pair."""
    remaining = sorted(
        range(len(candidates)),
        key=lambda i: (-candidates[i].score, candidates[i].box.x_min,
                       candidates[i].box.y_min, i),
    )
    kept = []
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        remaining = [
            i for i in remaining
            if iou(candidates[best].box, candidates[i].box) <= threshold
        ]
    return [candidates[i] for i in kept]


def random_candidates(rng, n, span=50.0, quantize=True):
    out = []
    for _ in range(n):
        x0, y0 = rng.uniform(0, span, 2)
        w, h = rng.uniform(1, span / 3, 2)
        score = rng.uniform(0, 1)
        if quantize:
            score = round(score, 2)  # force score ties to exercise tie-breaking
        out.append(CharCandidate(BBox(x0, y0, x0 + w, y0 + h), score))
    return out


class TestNms:
    def test_single_candidate(self):
        c = CharCandidate(BBox(0, 0, 10, 10), 0.7)
        assert nms([c], 0.45) == [c]

    def test_duplicate_boxes_keep_higher_score(self):
        a = CharCandidate(BBox(0, 0, 10, 10), 0.9)
        b = CharCandidate(BBox(0, 0, 10, 10), 0.8)
        assert nms([b, a], 0.45) == [a]

    def test_threshold_is_strict(self):
        # IoU exactly at the threshold is NOT suppressed
        a = CharCandidate(BBox(0, 0, 10, 10), 0.9)
        b = CharCandidate(BBox(0, 0, 10, 5), 0.8)  # iou exactly 0.5
        assert iou(a.box, b.box) == 0.5
        assert nms([a, b], 0.5) == [a, b]

    def test_empty(self):
        assert nms([], 0.45) == []

    def test_threshold_validated(self):
        with pytest.raises(ValidationError):
            nms([], 0.0)
        with pytest.raises(ValidationError):
            nms([], 1.0)

    def test_matches_quadratic_reference_on_random_sets(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            cands = random_candidates(rng, int(rng.integers(0, 200)))
            got = nms(cands, 0.45)
            assert got == reference_nms(cands, 0.45)

    def test_output_is_suppression_free_and_sorted(self):
        rng = np.random.default_rng(32)
        cands = random_candidates(rng, 120)
        out = nms(cands, 0.45)
        scores = [c.score for c in out]
        assert scores == sorted(scores, reverse=True)
        for i, a in enumerate(out):
            for b in out[i + 1:]:
                assert iou(a.box, b.box) <= 0.45

    def test_idempotent(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            cands = random_candidates(rng, 80)
            once = nms(cands, 0.45)
            assert nms(once, 0.45) == once

    def test_nms_indices_order(self):
        boxes = np.array([[0, 0, 10, 10], [30, 30, 40, 40], [0, 0, 10, 10.0]])
        scores = np.array([0.5, 0.9, 0.5])
        # 0.9 first; then tie between 0 and 2 broken by input order (equal boxes)
        assert nms_indices(boxes, scores, 0.45) == [1, 0]

import numpy as np
import pytest

from charmine.data import (
    CharAnnotation,
    CharCandidate,
    DatasetManifest,
    ImageRecord,
    WeakAnnotation,
)
from charmine.errors import ValidationError
from charmine.geometry import BBox
from charmine.mining import MinedSample, MiningConfig, merge_training_set, mine_semi, mine_weak


def literal_semi(candidates, config):
    """Direct transcription of the score-gate filter."""
    return [c for c in candidates if c.score > config.score_threshold]


def literal_weak(candidates, words, config):
    """Direct transcription of the guided filter, one candidate at a time."""
    kept = []
    for c in candidates:
        if not c.score > config.weak_score_threshold:
            continue
        w = c.box.x_max - c.box.x_min
        h = c.box.y_max - c.box.y_min
        ok = False
        for g in words:
            ix = max(0.0, min(c.box.x_max, g.x_max) - max(c.box.x_min, g.x_min))
            iy = max(0.0, min(c.box.y_max, g.y_max) - max(c.box.y_min, g.y_min))
            if ix / w > config.t_x and iy / h > config.t_y:
                ok = True
                break
        if ok:
            kept.append(c)
    return kept


def random_case(rng):
    n = int(rng.integers(0, 12))
    candidates = []
    for _ in range(n):
        x0, y0 = rng.uniform(0, 80, 2)
        w, h = rng.uniform(2, 20, 2)
        candidates.append(CharCandidate(BBox(x0, y0, x0 + w, y0 + h),
                                        float(rng.uniform(0, 1))))
    words = []
    for _ in range(int(rng.integers(0, 4))):
        x0, y0 = rng.uniform(0, 70, 2)
        w, h = rng.uniform(5, 50, 2)
        words.append(BBox(x0, y0, x0 + w, y0 + h))
    config = MiningConfig(
        score_threshold=float(rng.uniform(0.05, 0.95)),
        weak_score_threshold=float(rng.uniform(0.05, 0.95)),
        t_x=float(rng.uniform(0.1, 0.95)),
        t_y=float(rng.uniform(0.1, 0.95)),
    )
    return candidates, words, config


class TestMineSemi:
    def test_threshold_keeps_strictly_above(self):
        config = MiningConfig(score_threshold=0.5)
        cands = [CharCandidate(BBox(0, 0, 5, 5), s) for s in (0.6, 0.45, 0.9)]
        kept = mine_semi(cands, config)
        assert [m.score for m in kept] == [0.6, 0.9]

    def test_boundary_score_discarded(self):
        config = MiningConfig(score_threshold=0.5)
        assert mine_semi([CharCandidate(BBox(0, 0, 5, 5), 0.5)], config) == []

    def test_empty(self):
        assert mine_semi([], MiningConfig()) == []

    def test_fields(self):
        kept = mine_semi([CharCandidate(BBox(0, 0, 5, 5), 0.8)], MiningConfig(),
                         image_id="img", round_index=2)
        assert kept[0] == MinedSample("img", BBox(0, 0, 5, 5), 0.8, "semi", 2)


class TestMineWeak:
    def test_contained_candidate_kept(self):
        config = MiningConfig(weak_score_threshold=0.2)
        c = CharCandidate(BBox(0, 0, 10, 10), 0.25)
        weak = WeakAnnotation((BBox(0, 0, 100, 12),))
        assert len(mine_weak([c], weak, config)) == 1

    def test_horizontal_ratio_too_small(self):
        config = MiningConfig()
        c = CharCandidate(BBox(0, 0, 10, 10), 0.9)
        weak = WeakAnnotation((BBox(8, 0, 20, 10),))  # I_x/W = 0.2 < 0.8
        assert mine_weak([c], weak, config) == []

    def test_low_score_discarded_despite_containment(self):
        config = MiningConfig(weak_score_threshold=0.2)
        c = CharCandidate(BBox(1, 1, 9, 9), 0.15)
        weak = WeakAnnotation((BBox(0, 0, 50, 10),))
        assert mine_weak([c], weak, config) == []

    def test_empty_word_set_mines_nothing(self):
        c = CharCandidate(BBox(0, 0, 10, 10), 0.99)
        assert mine_weak([c], WeakAnnotation(()), MiningConfig()) == []

    def test_both_ratios_must_hold_for_same_word(self):
        # one word satisfies x only, the other y only; candidate must be dropped
        config = MiningConfig(t_x=0.8, t_y=0.8)
        c = CharCandidate(BBox(10, 10, 20, 20), 0.9)
        g_x = BBox(9, 19, 21, 40)    # full x span, tiny y overlap
        g_y = BBox(19, 9, 40, 21)    # full y span, tiny x overlap
        assert mine_weak([c], WeakAnnotation((g_x, g_y)), config) == []


class TestOracleEquivalence:
    def test_semi_and_weak_match_literal_filters(self):
        rng = np.random.default_rng(41)
        for _ in range(2000):
            candidates, words, config = random_case(rng)
            semi = mine_semi(candidates, config)
            assert [m.box for m in semi] == [c.box for c in literal_semi(candidates, config)]
            weak = mine_weak(candidates, WeakAnnotation(tuple(words)), config)
            assert [m.box for m in weak] == [c.box for c in literal_weak(candidates, words, config)]

    def test_monotone_in_thresholds(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            candidates, words, config = random_case(rng)
            keys = lambda ms: {(m.box, m.score) for m in ms}
            tighter = MiningConfig(
                score_threshold=min(0.99, config.score_threshold + 0.1),
                weak_score_threshold=min(0.99, config.weak_score_threshold + 0.1),
                t_x=min(0.99, config.t_x + 0.1),
                t_y=min(0.99, config.t_y + 0.1),
            )
            weak = WeakAnnotation(tuple(words))
            assert keys(mine_semi(candidates, tighter)) <= keys(mine_semi(candidates, config))
            assert keys(mine_weak(candidates, weak, tighter)) <= keys(
                mine_weak(candidates, weak, config))

    def test_weak_subset_of_semi_at_equal_thresholds(self):
        rng = np.random.default_rng(43)
        for _ in range(300):
            candidates, words, config = random_case(rng)
            equal = MiningConfig(
                score_threshold=config.weak_score_threshold,
                weak_score_threshold=config.weak_score_threshold,
                t_x=config.t_x, t_y=config.t_y,
            )
            weak = {m.box for m in mine_weak(candidates, WeakAnnotation(tuple(words)), equal)}
            semi = {m.box for m in mine_semi(candidates, equal)}
            assert weak <= semi

    def test_perfect_ground_truth_recovered(self):
        rng = np.random.default_rng(44)
        config = MiningConfig()
        for _ in range(100):
            words = []
            candidates = []
            x = 0.0
            for _ in range(int(rng.integers(1, 5))):
                w, h = rng.uniform(20, 40), rng.uniform(8, 15)
                y = rng.uniform(0, 50)
                words.append(BBox(x, y, x + w, y + h))
                cx = x + rng.uniform(1, 3)
                candidates.append(CharCandidate(
                    BBox(cx, y + 1, cx + rng.uniform(4, 8), y + h - 1),
                    float(rng.uniform(config.weak_score_threshold + 0.01, 1.0)),
                ))
                x += w + 10
            kept = mine_weak(candidates, WeakAnnotation(tuple(words)), config)
            assert len(kept) == len(candidates)


def record(image_id, tier="full", chars=(), words=(), size=100):
    return ImageRecord(image_id, f"{image_id}.png", size, size, tier,
                       tuple(CharAnnotation(b) for b in chars),
                       WeakAnnotation(tuple(words)))


class TestMergeTrainingSet:
    def setup_method(self):
        self.base = DatasetManifest(
            (record("base_0", chars=[BBox(0, 0, 10, 10)]),), name="base")
        self.source = DatasetManifest(
            (record("src_0", tier="none"), record("src_1", tier="none")), name="src")

    def test_empty_mined_is_identity(self):
        assert merge_training_set(self.base, [], self.source) is self.base

    def test_two_samples_one_image_adds_one_record(self):
        mined = [
            MinedSample("src_0", BBox(0, 0, 5, 5), 0.9, "semi", 1),
            MinedSample("src_0", BBox(10, 0, 15, 5), 0.8, "semi", 1),
        ]
        merged = merge_training_set(self.base, mined, self.source)
        assert len(merged) == len(self.base) + 1
        new = merged.by_id("src_0")
        assert new.tier == "full"
        assert len(new.char_annotations) == 2
        assert new.meta["round"] == 1
        assert new.meta["source_tier"] == "semi"

    def test_base_records_unmodified(self):
        mined = [MinedSample("src_1", BBox(0, 0, 5, 5), 0.9, "weak", 1)]
        merged = merge_training_set(self.base, mined, self.source)
        assert merged.records[: len(self.base)] == self.base.records

    def test_mined_on_base_image_rejected(self):
        mined = [MinedSample("base_0", BBox(0, 0, 5, 5), 0.9, "semi", 1)]
        with pytest.raises(ValidationError):
            merge_training_set(self.base, mined, self.source)

    def test_dangling_image_rejected(self):
        mined = [MinedSample("ghost", BBox(0, 0, 5, 5), 0.9, "semi", 1)]
        with pytest.raises(ValidationError):
            merge_training_set(self.base, mined, self.source)

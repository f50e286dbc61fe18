"""Mining new positive character samples from detector output.

Semi-supervised mining keeps candidates purely by score threshold; weakly
supervised mining additionally requires a candidate to sit mostly inside a
single word/text-line box, measured by per-axis intersection ratios. All
comparisons are strict (boundary-equal values are rejected).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .data import (
    CharAnnotation,
    CharCandidate,
    DatasetManifest,
    ImageRecord,
    WeakAnnotation,
    with_records,
)
from .errors import ValidationError
from .geometry import BBox, directional_intersections

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiningConfig:
    """Thresholds for both mining modes."""

    score_threshold: float = 0.5        # semi-supervised confidence gate
    weak_score_threshold: float = 0.2   # weakly supervised confidence gate
    t_x: float = 0.8                    # horizontal intersection ratio gate
    t_y: float = 0.8                    # vertical intersection ratio gate

    def __post_init__(self):
        for name in ("score_threshold", "weak_score_threshold", "t_x", "t_y"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValidationError(f"mining {name}={v} outside (0, 1)")


@dataclass(frozen=True)
class MinedSample:
    """A pseudo-positive character accepted by one of the mining filters."""

    image_id: str
    box: BBox
    score: float
    source_tier: str  # "semi" or "weak"
    round: int = 1

    def __post_init__(self):
        if self.source_tier not in ("semi", "weak"):
            raise ValidationError(f"unknown source_tier {self.source_tier!r}")
        if self.round < 1:
            raise ValidationError(f"round {self.round} must be >= 1")


def mine_semi(candidates: Sequence[CharCandidate], config: MiningConfig,
              image_id: str = "", round_index: int = 1) -> list[MinedSample]:
    """Keep candidates whose score strictly exceeds the confidence gate."""
    return [
        MinedSample(image_id, c.box, c.score, "semi", round_index)
        for c in candidates
        if c.score > config.score_threshold
    ]


def _inside_some_word(c: CharCandidate, words: Sequence[BBox], config: MiningConfig) -> bool:
    w, h = c.box.width, c.box.height
    for g in words:
        ix, iy = directional_intersections(c.box, g)
        if ix / w > config.t_x and iy / h > config.t_y:
            return True
    return False


def mine_weak(candidates: Sequence[CharCandidate], weak: WeakAnnotation,
              config: MiningConfig, image_id: str = "",
              round_index: int = 1) -> list[MinedSample]:
    """Keep candidates above the weak gate that sit mostly inside one word box.

    Both axis ratios must be satisfied by the same word box: a character
    belongs to one word, and independent maxima could pass a candidate
    straddling two words.
    """
    if not weak.boxes:
        return []
    return [
        MinedSample(image_id, c.box, c.score, "weak", round_index)
        for c in candidates
        if c.score > config.weak_score_threshold
        and _inside_some_word(c, weak.boxes, config)
    ]


def merge_training_set(base: DatasetManifest, mined: Sequence[MinedSample],
                       source_manifest: DatasetManifest) -> DatasetManifest:
    """Append mined samples to the fully annotated base set.

    Each source image that contributed samples becomes one new full-tier
    record whose character annotations are the mined boxes verbatim.
    Mining sources and the base set must be disjoint by image_id.
    """
    base_ids = base.ids()
    by_image: dict[str, list[MinedSample]] = {}
    for sample in mined:
        by_image.setdefault(sample.image_id, []).append(sample)

    source_ids = source_manifest.ids()
    new_records = []
    for image_id, samples in by_image.items():
        if image_id in base_ids:
            raise ValidationError(
                f"mined sample references base-set image {image_id!r}; "
                "mining sources and base must be disjoint"
            )
        if image_id not in source_ids:
            raise ValidationError(f"mined sample references unknown image {image_id!r}")
        src = source_manifest.by_id(image_id)
        new_records.append(
            ImageRecord(
                image_id=image_id,
                image_path=src.image_path,
                width=src.width,
                height=src.height,
                tier="full",
                char_annotations=tuple(CharAnnotation(s.box) for s in samples),
                meta={
                    "mined": True,
                    "round": samples[0].round,
                    "source_tier": samples[0].source_tier,
                    "source_dataset": source_manifest.name,
                },
            )
        )
    if not new_records:
        return base
    round_index = new_records[0].meta["round"]
    return with_records(
        base,
        tuple(base.records) + tuple(new_records),
        name=f"{base.name}+mined_r{round_index}",
    )

"""Default anchor grids and box offset encoding for the single-shot detector.

Anchors live in normalized [0, 1] image coordinates, center-form. The anchor
list is ordered level -> scale -> row -> column -> aspect ratio so that
prediction-head outputs and targets line up deterministically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..geometry import BBox, boxes_to_array, iou_matrix


@dataclass(frozen=True)
class AnchorLevel:
    feature_map_size: int
    anchor_scales: tuple[float, ...]
    aspect_ratios: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "anchor_scales", tuple(self.anchor_scales))
        object.__setattr__(self, "aspect_ratios", tuple(self.aspect_ratios))
        if self.feature_map_size < 1:
            raise ValidationError(f"feature_map_size {self.feature_map_size} < 1")
        if not self.anchor_scales or not self.aspect_ratios:
            raise ValidationError("anchor level needs at least one scale and one ratio")
        for s in self.anchor_scales:
            if not 0.0 < s <= 1.0:
                raise ValidationError(f"anchor scale {s} outside (0, 1]")
        for r in self.aspect_ratios:
            if r <= 0:
                raise ValidationError(f"aspect ratio {r} <= 0")

    @property
    def anchors_per_cell(self) -> int:
        return len(self.anchor_scales) * len(self.aspect_ratios)


@dataclass(frozen=True)
class AnchorConfig:
    levels: tuple[AnchorLevel, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValidationError("anchor config needs at least one level")
        sizes = [lvl.feature_map_size for lvl in self.levels]
        if any(a <= b for a, b in zip(sizes, sizes[1:])):
            raise ValidationError(f"feature map sizes must strictly decrease: {sizes}")

    @property
    def total_anchors(self) -> int:
        return sum(lvl.feature_map_size ** 2 * lvl.anchors_per_cell for lvl in self.levels)

    def to_dict(self) -> dict:
        return {
            "levels": [
                {
                    "feature_map_size": lvl.feature_map_size,
                    "anchor_scales": list(lvl.anchor_scales),
                    "aspect_ratios": list(lvl.aspect_ratios),
                }
                for lvl in self.levels
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnchorConfig":
        return cls(
            tuple(
                AnchorLevel(
                    int(lvl["feature_map_size"]),
                    tuple(float(s) for s in lvl["anchor_scales"]),
                    tuple(float(r) for r in lvl["aspect_ratios"]),
                )
                for lvl in d["levels"]
            )
        )


@dataclass(frozen=True)
class DefaultAnchor:
    """Center-form prior box in normalized image coordinates."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValidationError(f"anchor extent ({self.w}, {self.h}) outside (0, 1]")

    def to_corner(self) -> tuple[float, float, float, float]:
        return (
            self.cx - 0.5 * self.w,
            self.cy - 0.5 * self.h,
            self.cx + 0.5 * self.w,
            self.cy + 0.5 * self.h,
        )


def anchor_array(config: AnchorConfig) -> np.ndarray:
    """All anchors as an (N, 4) center-form float64 array in canonical order."""
    rows = []
    for lvl in config.levels:
        f = lvl.feature_map_size
        centers = (np.arange(f, dtype=np.float64) + 0.5) / f
        for scale in lvl.anchor_scales:
            for cy in centers:          # row-major over cells
                for cx in centers:
                    for ratio in lvl.aspect_ratios:
                        w = scale * math.sqrt(ratio)
                        h = scale / math.sqrt(ratio)
                        rows.append((cx, cy, min(w, 1.0), min(h, 1.0)))
    return np.asarray(rows, dtype=np.float64)


def generate_anchors(config: AnchorConfig) -> list[DefaultAnchor]:
    return [DefaultAnchor(*row) for row in anchor_array(config)]


def center_to_corner(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64).reshape(-1, 4)
    half = arr[:, 2:] * 0.5
    return np.concatenate([arr[:, :2] - half, arr[:, :2] + half], axis=1)


def corner_to_center(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64).reshape(-1, 4)
    return np.concatenate([(arr[:, :2] + arr[:, 2:]) * 0.5, arr[:, 2:] - arr[:, :2]], axis=1)


def encode(gt: BBox, anchor: DefaultAnchor) -> tuple[float, float, float, float]:
    """Regression offsets from an anchor to a normalized ground-truth box."""
    gcx, gcy = gt.center
    return (
        (gcx - anchor.cx) / anchor.w,
        (gcy - anchor.cy) / anchor.h,
        math.log(gt.width / anchor.w),
        math.log(gt.height / anchor.h),
    )


def decode(offsets, anchor: DefaultAnchor) -> BBox:
    """Inverse of :func:`encode`."""
    dx, dy, dw, dh = offsets
    cx = anchor.cx + dx * anchor.w
    cy = anchor.cy + dy * anchor.h
    w = anchor.w * math.exp(dw)
    h = anchor.h * math.exp(dh)
    return BBox.from_center(cx, cy, w, h)


def encode_array(gt_corner: np.ndarray, anchors_center: np.ndarray) -> np.ndarray:
    """Vectorized encode: (N, 4) corner gts against (N, 4) center anchors."""
    g = corner_to_center(gt_corner)
    a = np.asarray(anchors_center, dtype=np.float64).reshape(-1, 4)
    out = np.empty_like(g)
    out[:, :2] = (g[:, :2] - a[:, :2]) / a[:, 2:]
    out[:, 2:] = np.log(g[:, 2:] / a[:, 2:])
    return out


def decode_array(offsets: np.ndarray, anchors_center: np.ndarray) -> np.ndarray:
    """Vectorized decode to (N, 4) corner-form boxes."""
    o = np.asarray(offsets, dtype=np.float64).reshape(-1, 4)
    a = np.asarray(anchors_center, dtype=np.float64).reshape(-1, 4)
    centers = a[:, :2] + o[:, :2] * a[:, 2:]
    sizes = a[:, 2:] * np.exp(o[:, 2:])
    half = sizes * 0.5
    return np.concatenate([centers - half, centers + half], axis=1)


def match_anchors(anchors, gt_boxes, iou_threshold: float = 0.5) -> np.ndarray:
    """Assign anchors to ground-truth boxes.

    Returns an int array with the matched gt index per anchor, -1 for
    negatives. Any anchor with IoU >= threshold to some gt is positive
    (ties to the lowest gt index); additionally every gt claims its single
    best-IoU anchor (ties to the lowest anchor index), overriding the
    threshold rule.
    """
    if isinstance(anchors, np.ndarray):
        anchors_corner = center_to_corner(anchors)
    else:
        anchors_corner = np.asarray([a.to_corner() for a in anchors], dtype=np.float64)
    n = anchors_corner.shape[0]
    assignment = np.full(n, -1, dtype=np.int64)
    if len(gt_boxes) == 0:
        return assignment
    if isinstance(gt_boxes, np.ndarray):
        gt_corner = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    else:
        gt_corner = boxes_to_array(gt_boxes)
    overlaps = iou_matrix(anchors_corner, gt_corner)
    best_gt = overlaps.argmax(axis=1)
    best_iou = overlaps[np.arange(n), best_gt]
    assignment[best_iou >= iou_threshold] = best_gt[best_iou >= iou_threshold]
    # Forced matches: processed in gt order, later gts win collisions.
    for j in range(gt_corner.shape[0]):
        assignment[int(overlaps[:, j].argmax())] = j
    return assignment

"""Greedy non-maximum suppression with deterministic tie-breaking."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..data import CharCandidate
from ..geometry import boxes_to_array


def nms_indices(boxes: np.ndarray, scores: np.ndarray, overlap_threshold: float) -> list[int]:
    """Indices surviving suppression, in descending-score order.

    Score ties break by smaller x_min, then smaller y_min, then input index.
    A kept box suppresses others with IoU strictly greater than the threshold.
    """
    if not 0.0 < overlap_threshold < 1.0:
        raise ValidationError(f"nms threshold {overlap_threshold} outside (0, 1)")
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if boxes.shape[0] == 0:
        return []
    # lexsort: last key is primary
    order = np.lexsort((boxes[:, 1], boxes[:, 0], -scores))
    x0, y0, x1, y1 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x1 - x0) * (y1 - y0)
    keep: list[int] = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        ix = np.minimum(x1[i], x1[rest]) - np.maximum(x0[i], x0[rest])
        iy = np.minimum(y1[i], y1[rest]) - np.maximum(y0[i], y0[rest])
        inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
        union = areas[i] + areas[rest] - inter
        iou = np.where(union > 0, inter / union, 0.0)
        order = rest[iou <= overlap_threshold]
    return keep


def nms(candidates: Sequence[CharCandidate], overlap_threshold: float) -> list[CharCandidate]:
    """Suppress overlapping candidates; output sorted by score descending."""
    boxes = boxes_to_array([c.box for c in candidates])
    scores = np.asarray([c.score for c in candidates], dtype=np.float64)
    return [candidates[i] for i in nms_indices(boxes, scores, overlap_threshold)]

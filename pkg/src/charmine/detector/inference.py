"""Single-image inference with the published post-processing recipe:

rank by text score, keep the top 1000 candidates, suppress at Jaccard 0.45,
keep the top 500, then map boxes back to source-image coordinates.

The backbone is fully convolutional, so a test size different from the
training input just reruns the net at that resolution; the anchor grid is
rebuilt for the resulting feature-map sizes with the checkpoint's scales
and ratios.
"""
from __future__ import annotations

import numpy as np
import torch

from ..data import CharCandidate
from ..errors import ValidationError
from ..geometry import BBox
from ..imgio import resize_image
from .anchors import AnchorConfig, AnchorLevel, anchor_array, decode_array
from .checkpoint import DetectorModel
from .nms import nms_indices

PRE_NMS_TOP_K = 1000
POST_NMS_TOP_K = 500
NMS_OVERLAP = 0.45


def runtime_anchor_config(trained: AnchorConfig, test_size: int) -> AnchorConfig:
    """Anchor grid for running the net at an arbitrary square input size."""
    sizes = (test_size // 4, test_size // 8, test_size // 16)
    if sizes[-1] < 1:
        raise ValidationError(f"test_size {test_size} too small for the backbone")
    return AnchorConfig(tuple(
        AnchorLevel(size, lvl.anchor_scales, lvl.aspect_ratios)
        for size, lvl in zip(sizes, trained.levels)
    ))


def infer(model: DetectorModel, image: np.ndarray, test_size: int | None = None
          ) -> list[CharCandidate]:
    """Detect characters in one RGB image array."""
    if test_size is None:
        test_size = model.input_size
    if test_size <= 0:
        raise ValidationError(f"test_size {test_size} must be positive")
    orig_h, orig_w = image.shape[:2]
    resized = resize_image(image, test_size)
    tensor = torch.from_numpy(resized.transpose(2, 0, 1).copy())
    tensor = tensor.unsqueeze(0).float().div_(255.0).sub_(0.5).div_(0.25)

    config = (model.anchor_config if test_size == model.input_size
              else runtime_anchor_config(model.anchor_config, test_size))
    anchors_center = anchor_array(config)

    torch.use_deterministic_algorithms(True)
    model.net.eval()
    with torch.no_grad():
        loc, logits = model.net(tensor)
    if logits.shape[1] != anchors_center.shape[0]:
        raise ValidationError(
            f"anchor grid ({anchors_center.shape[0]}) does not match network "
            f"output ({logits.shape[1]}) at test size {test_size}"
        )
    scores = torch.softmax(logits[0], dim=-1)[:, 1].numpy().astype(np.float64)
    offsets = loc[0].numpy().astype(np.float64)

    boxes = decode_array(offsets, anchors_center)
    np.clip(boxes, 0.0, 1.0, out=boxes)
    valid = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
    boxes, scores = boxes[valid], scores[valid]

    order = np.lexsort((boxes[:, 1], boxes[:, 0], -scores))[:PRE_NMS_TOP_K]
    boxes, scores = boxes[order], scores[order]
    keep = nms_indices(boxes, scores, NMS_OVERLAP)[:POST_NMS_TOP_K]

    return [
        CharCandidate(
            BBox(boxes[i, 0] * orig_w, boxes[i, 1] * orig_h,
                 boxes[i, 2] * orig_w, boxes[i, 3] * orig_h),
            float(scores[i]),
        )
        for i in keep
    ]

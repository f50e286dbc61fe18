"""Single-shot character detector: anchors, network, training, inference, NMS."""

from .anchors import (
    AnchorConfig,
    AnchorLevel,
    DefaultAnchor,
    anchor_array,
    decode,
    decode_array,
    encode,
    encode_array,
    generate_anchors,
    match_anchors,
)
from .checkpoint import DetectorModel, load_checkpoint, save_checkpoint
from .inference import NMS_OVERLAP, POST_NMS_TOP_K, PRE_NMS_TOP_K, infer
from .net import CharDetectorNet, default_anchor_config, new_net
from .nms import nms, nms_indices
from .training import TrainSchedule, manifest_fingerprint, train

__all__ = [
    "AnchorConfig",
    "AnchorLevel",
    "CharDetectorNet",
    "DefaultAnchor",
    "DetectorModel",
    "NMS_OVERLAP",
    "POST_NMS_TOP_K",
    "PRE_NMS_TOP_K",
    "TrainSchedule",
    "anchor_array",
    "decode",
    "decode_array",
    "default_anchor_config",
    "encode",
    "encode_array",
    "generate_anchors",
    "infer",
    "load_checkpoint",
    "manifest_fingerprint",
    "match_anchors",
    "new_net",
    "nms",
    "nms_indices",
    "save_checkpoint",
    "train",
]

"""Weakly supervised scene character detection and text line extraction.

A light detector trained on a small fully annotated set mines new positive
character samples from unannotated (score gate) or weakly annotated
(word-box guided) images, retrains, and groups detections into text lines
with a min-cost-flow model. A deterministic synthetic scene generator
provides a desk-scale benchmark.
"""

__version__ = "0.1.0"

from .data import CharAnnotation, CharCandidate, DatasetManifest, ImageRecord, WeakAnnotation
from .geometry import BBox, directional_intersections, iou
from .mining import MinedSample, MiningConfig, mine_semi, mine_weak
from .lines import FlowGraphConfig, TextLine, extract_lines

__all__ = [
    "BBox",
    "CharAnnotation",
    "CharCandidate",
    "DatasetManifest",
    "FlowGraphConfig",
    "ImageRecord",
    "MinedSample",
    "MiningConfig",
    "TextLine",
    "WeakAnnotation",
    "__version__",
    "directional_intersections",
    "extract_lines",
    "iou",
    "mine_semi",
    "mine_weak",
]

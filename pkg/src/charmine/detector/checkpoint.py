"""Checkpoint persistence: parameter blob plus a JSON metadata sidecar."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..errors import VersionError
from .anchors import AnchorConfig
from .net import CharDetectorNet

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class DetectorModel:
    """A loaded detector: network plus the metadata that reproduces it."""

    net: CharDetectorNet
    anchor_config: AnchorConfig
    input_size: int
    meta: dict = field(default_factory=dict)

    @property
    def round_index(self) -> int:
        return int(self.meta.get("round", 0))


def meta_path(path) -> Path:
    return Path(path).with_suffix(".meta.json")


def save_checkpoint(model: DetectorModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.net.state_dict(), path)
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "anchor_config": model.anchor_config.to_dict(),
        "input_size": model.input_size,
        "widths": list(model.net.widths),
        **model.meta,
    }
    with meta_path(path).open("w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_checkpoint(path) -> DetectorModel:
    path = Path(path)
    with meta_path(path).open("r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise VersionError(
            f"{path}: checkpoint format_version {meta.get('format_version')!r}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}"
        )
    anchor_config = AnchorConfig.from_dict(meta["anchor_config"])
    net = CharDetectorNet(anchor_config, int(meta["input_size"]), tuple(meta["widths"]))
    net.load_state_dict(torch.load(path, map_location="cpu", weights_only=True))
    net.eval()
    extra = {
        k: v for k, v in meta.items()
        if k not in ("format_version", "anchor_config", "input_size", "widths")
    }
    return DetectorModel(net, anchor_config, int(meta["input_size"]), extra)

"""SGD training of the character detector with hard-negative mining.

Loss is smooth-L1 on the offsets of positive anchors plus softmax
cross-entropy with negatives mined at 3:1 against positives per image,
normalized by the batch positive count. Runs are seed-deterministic.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from ..data import DatasetManifest
from ..errors import TrainingError, ValidationError
from ..imgio import load_image, resize_image
from .anchors import anchor_array, encode_array, match_anchors
from .checkpoint import DetectorModel
from .net import CharDetectorNet

logger = logging.getLogger(__name__)

NEGATIVE_RATIO = 3
MATCH_IOU = 0.5


@dataclass(frozen=True)
class TrainSchedule:
    """Learning-rate stages plus the fixed optimizer settings."""

    stages: tuple[tuple[int, float], ...]
    batch_size: int = 32
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple((int(i), float(lr)) for i, lr in self.stages))
        if not self.stages:
            raise ValidationError("schedule needs at least one stage")
        for iters, lr in self.stages:
            if iters <= 0 or lr <= 0:
                raise ValidationError(f"bad schedule stage ({iters}, {lr})")
        lrs = [lr for _, lr in self.stages]
        if any(a <= b for a, b in zip(lrs, lrs[1:])):
            raise ValidationError(f"learning rates must decrease across stages: {lrs}")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")

    @property
    def total_iterations(self) -> int:
        return sum(i for i, _ in self.stages)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSchedule":
        return cls(
            stages=tuple((int(i), float(lr)) for i, lr in d["stages"]),
            batch_size=int(d.get("batch_size", 32)),
            momentum=float(d.get("momentum", 0.9)),
            weight_decay=float(d.get("weight_decay", 5e-4)),
            seed=int(d.get("seed", 0)),
        )


def manifest_fingerprint(manifest: DatasetManifest) -> str:
    """Content hash of a manifest's records for checkpoint provenance."""
    payload = json.dumps(
        [
            (
                r.image_id,
                r.tier,
                [a.box.to_tuple() for a in r.char_annotations],
                [b.to_tuple() for b in r.weak_annotations.boxes],
            )
            for r in manifest.records
        ],
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _image_tensor(record, input_size: int) -> torch.Tensor:
    arr = resize_image(load_image(Path(record.image_path)), input_size)
    return torch.from_numpy(arr.transpose(2, 0, 1).copy())


def _targets(record, anchors_center: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-anchor class labels and offset targets in normalized coordinates."""
    n = anchors_center.shape[0]
    gt = np.asarray(
        [a.box.scale(1.0 / record.width, 1.0 / record.height).to_tuple()
         for a in record.char_annotations],
        dtype=np.float64,
    ).reshape(-1, 4)
    labels = torch.zeros(n, dtype=torch.long)
    loc_t = torch.zeros((n, 4), dtype=torch.float32)
    if gt.shape[0]:
        assignment = match_anchors(anchors_center, gt, MATCH_IOU)
        pos = assignment >= 0
        if pos.any():
            labels[torch.from_numpy(pos)] = 1
            offsets = encode_array(gt[assignment[pos]], anchors_center[pos])
            loc_t[torch.from_numpy(pos)] = torch.from_numpy(offsets.astype(np.float32))
    return labels, loc_t


class _TrainingSet:
    """Decoded images and precomputed anchor targets, cached per record."""

    def __init__(self, manifest: DatasetManifest, input_size: int, anchors_center: np.ndarray):
        self.records = [r for r in manifest.records if r.tier == "full"]
        if not self.records:
            raise TrainingError("training manifest has no full-tier records")
        if sum(len(r.char_annotations) for r in self.records) == 0:
            raise TrainingError("training manifest has no character boxes")
        self.images = torch.stack([_image_tensor(r, input_size) for r in self.records])
        packed = [_targets(r, anchors_center) for r in self.records]
        self.labels = torch.stack([p[0] for p in packed])
        self.loc_t = torch.stack([p[1] for p in packed])

    def __len__(self) -> int:
        return len(self.records)

    def batch(self, idx: np.ndarray) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        ix = torch.from_numpy(np.asarray(idx, dtype=np.int64))
        images = self.images[ix].float().div_(255.0).sub_(0.5).div_(0.25)
        return images, self.labels[ix], self.loc_t[ix]


def detection_loss(loc: torch.Tensor, logits: torch.Tensor,
                   labels: torch.Tensor, loc_t: torch.Tensor) -> torch.Tensor:
    """SSD-style multibox loss over one batch."""
    pos = labels > 0
    n_pos = int(pos.sum())
    if n_pos == 0:
        return logits.sum() * 0.0
    loc_loss = F.smooth_l1_loss(loc[pos], loc_t[pos], reduction="sum")
    ce = F.cross_entropy(logits.reshape(-1, 2), labels.reshape(-1), reduction="none")
    ce = ce.view(labels.shape)
    conf_loss = ce[pos].sum()
    # hard-negative mining, 3:1 per image, stable sort for determinism
    neg_ce = ce.masked_fill(pos, -1.0)
    ranked, _ = neg_ce.sort(dim=1, descending=True, stable=True)
    for b in range(labels.shape[0]):
        k = min(NEGATIVE_RATIO * int(pos[b].sum()), int((~pos[b]).sum()))
        if k > 0:
            conf_loss = conf_loss + ranked[b, :k].sum()
    return (loc_loss + conf_loss) / n_pos


def _probe_loss(net: CharDetectorNet, dataset: _TrainingSet, batch_size: int) -> float:
    idx = np.arange(min(batch_size, len(dataset)))
    images, labels, loc_t = dataset.batch(idx)
    net.eval()
    with torch.no_grad():
        loc, logits = net(images)
        loss = detection_loss(loc, logits, labels, loc_t)
    return float(loss)


def train(model_init: DetectorModel, manifest: DatasetManifest,
          schedule: TrainSchedule, progress_every: int = 0) -> DetectorModel:
    """Train a copy of the given model; the input model is left untouched."""
    torch.use_deterministic_algorithms(True)
    torch.manual_seed(schedule.seed)
    net = CharDetectorNet(model_init.anchor_config, model_init.input_size,
                          model_init.net.widths)
    net.load_state_dict(model_init.net.state_dict())

    anchors_center = anchor_array(model_init.anchor_config)
    dataset = _TrainingSet(manifest, model_init.input_size, anchors_center)
    rng = np.random.default_rng(schedule.seed)
    optimizer = torch.optim.SGD(net.parameters(), lr=schedule.stages[0][1],
                                momentum=schedule.momentum,
                                weight_decay=schedule.weight_decay)

    initial_loss = _probe_loss(net, dataset, schedule.batch_size)
    step = 0
    for iters, lr in schedule.stages:
        for group in optimizer.param_groups:
            group["lr"] = lr
        for _ in range(iters):
            idx = rng.integers(0, len(dataset), schedule.batch_size)
            images, labels, loc_t = dataset.batch(idx)
            net.train()
            optimizer.zero_grad()
            loc, logits = net(images)
            loss = detection_loss(loc, logits, labels, loc_t)
            if not math.isfinite(float(loss)):
                raise TrainingError(
                    f"non-finite loss {float(loss)} at iteration {step} (lr={lr})"
                )
            loss.backward()
            optimizer.step()
            step += 1
            if progress_every and step % progress_every == 0:
                logger.info("iter %d/%d loss %.4f", step, schedule.total_iterations,
                            float(loss))
    final_loss = _probe_loss(net, dataset, schedule.batch_size)
    net.eval()

    meta = dict(model_init.meta)
    meta.update(
        seed=schedule.seed,
        schedule=schedule.to_dict(),
        manifest_hash=manifest_fingerprint(manifest),
        source_manifest=manifest.name,
        initial_loss=initial_loss,
        final_loss=final_loss,
        iterations=schedule.total_iterations,
    )
    return DetectorModel(net, model_init.anchor_config, model_init.input_size, meta)

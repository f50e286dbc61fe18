"""Small convolutional backbone with per-anchor box/score prediction heads.

Four stride-2 stages; the last three feed 3x3 prediction heads emitting
6 values per anchor (4 offsets + 2 class logits). Head outputs are reshaped
to match the canonical anchor ordering (level -> scale -> row -> col -> ratio).
"""
from __future__ import annotations

import torch
from torch import nn

from ..errors import ValidationError
from .anchors import AnchorConfig, AnchorLevel

DEFAULT_WIDTHS = (16, 32, 48, 64)


def _block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.GroupNorm(4, cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.GroupNorm(4, cout),
        nn.ReLU(inplace=True),
        nn.MaxPool2d(2),
    )


class CharDetectorNet(nn.Module):
    """Proposal-free character detector over a fixed anchor grid."""

    def __init__(self, anchor_config: AnchorConfig, input_size: int,
                 widths: tuple[int, ...] = DEFAULT_WIDTHS):
        super().__init__()
        if len(widths) != 4:
            raise ValidationError("backbone expects exactly 4 stage widths")
        expected = tuple(input_size // s for s in (4, 8, 16))
        got = tuple(lvl.feature_map_size for lvl in anchor_config.levels)
        if got != expected:
            raise ValidationError(
                f"anchor feature maps {got} do not match input size {input_size} "
                f"(expected {expected})"
            )
        self.anchor_config = anchor_config
        self.input_size = input_size
        self.widths = tuple(widths)
        self.stages = nn.ModuleList([
            _block(3, widths[0]),
            _block(widths[0], widths[1]),
            _block(widths[1], widths[2]),
            _block(widths[2], widths[3]),
        ])
        heads = []
        for lvl, cout in zip(anchor_config.levels, widths[1:]):
            heads.append(nn.Conv2d(cout, lvl.anchors_per_cell * 6, 3, padding=1))
        self.heads = nn.ModuleList(heads)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (loc (B, N, 4), logits (B, N, 2)) over all anchors."""
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        locs = []
        logits = []
        for head, lvl, feat in zip(self.heads, self.anchor_config.levels, feats[1:]):
            out = head(feat)
            b, _, h, w = out.shape
            n_scales = len(lvl.anchor_scales)
            n_ratios = len(lvl.aspect_ratios)
            # channel layout (scale, ratio, 6) -> anchor order scale, row, col, ratio
            out = out.view(b, n_scales, n_ratios, 6, h, w)
            out = out.permute(0, 1, 4, 5, 2, 3).reshape(b, -1, 6)
            locs.append(out[..., :4])
            logits.append(out[..., 4:])
        return torch.cat(locs, dim=1), torch.cat(logits, dim=1)


def default_anchor_config(input_size: int) -> AnchorConfig:
    """Anchor grid sized for the default backbone at a given input size."""
    return AnchorConfig((
        AnchorLevel(input_size // 4, (0.08, 0.115, 0.16), (0.45, 0.7, 1.0)),
        AnchorLevel(input_size // 8, (0.22, 0.30), (0.45, 0.7, 1.0)),
        AnchorLevel(input_size // 16, (0.42, 0.60), (0.45, 0.7, 1.0)),
    ))


def new_net(anchor_config: AnchorConfig, input_size: int,
            widths: tuple[int, ...] = DEFAULT_WIDTHS, seed: int = 0) -> CharDetectorNet:
    """Freshly initialized network; parameter init is seed-deterministic."""
    torch.manual_seed(seed)
    net = CharDetectorNet(anchor_config, input_size, widths)
    for m in net.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.xavier_uniform_(m.weight)
            nn.init.zeros_(m.bias)
    return net

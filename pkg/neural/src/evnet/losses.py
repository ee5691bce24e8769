"""Reconstruction losses: L1 plus a frozen perceptual feature distance.

The perceptual term compares multi-scale convolutional features of the two
images. Pretrained feature extractors are unavailable in this offline build,
so the extractor is a fixed, seeded, randomly initialized conv stack --
deterministic, never trained, and used purely as a distance. The L1 term
carries most of the supervision; the feature term adds structure sensitivity.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

PERCEPTUAL_SEED = 71


class FeatureDistance(nn.Module):
    """Frozen random conv features; L1 distance accumulated over scales."""

    def __init__(self, widths=(16, 32, 64)):
        super().__init__()
        generator = torch.Generator().manual_seed(PERCEPTUAL_SEED)
        layers = []
        in_ch = 3
        for width in widths:
            conv = nn.Conv2d(in_ch, width, 3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(
                    torch.randn(conv.weight.shape, generator=generator) / (3.0 * in_ch**0.5)
                )
                conv.bias.zero_()
            layers.append(conv)
            in_ch = width
        self.layers = nn.ModuleList(layers)
        for p in self.parameters():
            p.requires_grad_(False)

    def features(self, x: torch.Tensor) -> list[torch.Tensor]:
        out = []
        for conv in self.layers:
            x = F.leaky_relu(conv(x), 0.1)
            out.append(x)
        return out

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        total = a.new_zeros(())
        for fa, fb in zip(self.features(a), self.features(b)):
            total = total + (fa - fb).abs().mean()
        return total


class ReconstructionLoss(nn.Module):
    def __init__(self, l1_weight: float = 1.0, perceptual_weight: float = 0.05):
        super().__init__()
        self.l1_weight = l1_weight
        self.perceptual_weight = perceptual_weight
        self.perceptual = FeatureDistance()

    def forward(self, prediction: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        loss = self.l1_weight * (prediction - target).abs().mean()
        if self.perceptual_weight > 0:
            loss = loss + self.perceptual_weight * self.perceptual(prediction, target)
        return loss

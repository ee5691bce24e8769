"""Hourglass backbone shared by all four learned modules.

A contracting/expanding convolutional network with shortcut connections
between mirrored resolutions. No normalization layers: every parameter is an
explicit weight, so freezing a module really freezes all of its state.
The final projection is zero-initialized, which makes each module start as a
well-defined identity-like function (zero flow, zero residual, equal
attention scores, constant synthesis).
"""

from __future__ import annotations

import torch
from torch import nn

DOWNSAMPLE_DEPTH = 3
BASE_WIDTH = 32


def conv_block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        nn.LeakyReLU(0.1, inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.LeakyReLU(0.1, inplace=True),
    )


class HourglassBackbone(nn.Module):
    """Encoder/decoder with skip connections; output size equals input size
    for spatial dimensions divisible by 2**DOWNSAMPLE_DEPTH."""

    def __init__(self, in_channels: int, out_channels: int, base_width: int = BASE_WIDTH):
        super().__init__()
        w = base_width
        widths = [w, 2 * w, 4 * w]

        self.enc = nn.ModuleList()
        ch = in_channels
        for width in widths:
            self.enc.append(conv_block(ch, width))
            ch = width
        self.pool = nn.AvgPool2d(2)
        self.bottleneck = conv_block(widths[-1], widths[-1])

        self.up = nn.ModuleList()
        self.dec = nn.ModuleList()
        ch = widths[-1]
        for width in reversed(widths):
            self.up.append(nn.ConvTranspose2d(ch, width, 2, stride=2))
            self.dec.append(conv_block(width + width, width))
            ch = width

        self.head = nn.Conv2d(widths[0], out_channels, 3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        for block in self.enc:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.up, self.dec, reversed(skips)):
            x = up(x)
            x = dec(torch.cat([x, skip], dim=1))
        return self.head(x)

"""Compact super-resolution CNN used as the deterministic base predictor.

Architecture: a 3x3 head conv, a stack of plain residual blocks (conv-relu-
conv with identity skip, no normalization), pixel-shuffle upsampling (one
x2 stage per factor of two), and a zero-initialized 3x3 output conv added
to a global bicubic skip. Zero init makes the untrained network reproduce
bicubic interpolation exactly, so training only ever has to learn a
correction on top of a sane baseline.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import upsample


def pixel_shuffle(x: torch.Tensor, scale: int) -> torch.Tensor:
    """Rearrange (B, C*s*s, H, W) -> (B, C, H*s, W*s).

    Output pixel (y*s+dy, x*s+dx) of channel c comes from input channel
    c*s*s + dy*s + dx at (y, x).
    """
    return F.pixel_shuffle(x, scale)


@dataclass
class SimpleSRConfig:
    scale: int = 4
    channels: int = 64
    blocks: int = 8

    def __post_init__(self):
        if self.scale < 1 or (self.scale & (self.scale - 1)) != 0:
            raise ValueError(f"scale must be a power of two, got {self.scale}")
        if self.channels < 1 or self.blocks < 0:
            raise ValueError("channels must be >= 1 and blocks >= 0")


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class SimpleSR(nn.Module):
    def __init__(self, config: SimpleSRConfig | None = None):
        super().__init__()
        self.config = config or SimpleSRConfig()
        c = self.config.channels
        self.head = nn.Conv2d(3, c, 3, padding=1)
        self.body = nn.Sequential(*[_ResidualBlock(c) for _ in range(self.config.blocks)])
        ups = []
        remaining = self.config.scale
        while remaining > 1:
            ups.append(nn.Conv2d(c, c * 4, 3, padding=1))
            remaining //= 2
        self.up_convs = nn.ModuleList(ups)
        self.tail = nn.Conv2d(c, 3, 3, padding=1)
        nn.init.zeros_(self.tail.weight)
        nn.init.zeros_(self.tail.bias)

    def forward(self, lr: torch.Tensor) -> torch.Tensor:
        batched = lr.ndim == 4
        x = lr if batched else lr.unsqueeze(0)
        base = upsample(x, self.config.scale, "bicubic")
        h = self.head(x)
        h = h + self.body(h)
        for conv in self.up_convs:
            h = pixel_shuffle(conv(h), 2)
        out = base + self.tail(h)
        if not self.training:
            out = out.clamp(-1.0, 1.0)
        return out if batched else out.squeeze(0)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())

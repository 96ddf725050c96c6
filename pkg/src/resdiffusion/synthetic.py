"""Deterministic synthetic image corpus.

Training and acceptance runs in this repository cannot assume any external
dataset, so we synthesize small RGB images with mixed low- and
high-frequency structure: smooth color gradients, band-limited noise,
oriented sinusoids, and hard-edged rectangles. Everything is derived from a
single integer seed, so two machines generate byte-identical corpora.
"""

import math
import os
from pathlib import Path

import torch

from .data import save_image
from .seeding import STREAM_DATA, generator_for


def synth_image(seed: int, size: int = 96) -> torch.Tensor:
    """One synthetic RGB image in [-1, 1], shaped (3, size, size)."""
    gen = generator_for(seed, STREAM_DATA)
    ys = torch.linspace(-1.0, 1.0, size).view(size, 1).expand(size, size)
    xs = torch.linspace(-1.0, 1.0, size).view(1, size).expand(size, size)

    def rand(*shape):
        return torch.rand(*shape, generator=gen)

    # Smooth base: random linear gradient per channel.
    gx = rand(3, 1, 1) * 2 - 1
    gy = rand(3, 1, 1) * 2 - 1
    bias = rand(3, 1, 1) * 1.0 - 0.5
    img = 0.5 * (gx * xs + gy * ys) + bias

    # Oriented sinusoid: mid/high-frequency content shared across channels.
    n_waves = int(rand(1).item() * 3) + 1
    for _ in range(n_waves):
        theta = rand(1).item() * math.pi
        freq = 2.0 + rand(1).item() * 14.0
        phase = rand(1).item() * 2 * math.pi
        amp = 0.10 + rand(1).item() * 0.25
        wave = torch.sin(freq * math.pi * (xs * math.cos(theta) + ys * math.sin(theta)) + phase)
        tint = rand(3, 1, 1) * 0.6 + 0.4
        img = img + amp * tint * wave

    # Hard-edged rectangles: step discontinuities the degradation blurs.
    n_rect = int(rand(1).item() * 4) + 2
    for _ in range(n_rect):
        h0 = int(rand(1).item() * (size - 8))
        w0 = int(rand(1).item() * (size - 8))
        hh = 4 + int(rand(1).item() * (size // 2))
        ww = 4 + int(rand(1).item() * (size // 2))
        color = rand(3, 1, 1) * 2 - 1
        alpha = 0.35 + rand(1).item() * 0.45
        region = img[:, h0 : h0 + hh, w0 : w0 + ww]
        img[:, h0 : h0 + hh, w0 : w0 + ww] = (1 - alpha) * region + alpha * color

    # Light texture noise, smoothed once to keep it band-limited.
    noise = torch.randn(3, size, size, generator=gen) * 0.05
    noise = torch.nn.functional.avg_pool2d(noise.unsqueeze(0), 3, stride=1, padding=1).squeeze(0)
    img = img + noise

    return img.clamp(-1.0, 1.0)


def make_corpus(root: str | os.PathLike, count: int, size: int = 96, seed: int = 0) -> list[str]:
    """Write ``count`` synthetic PNGs under ``root``; returns the filenames."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(count):
        name = f"synth_{i:05d}.png"
        path = root / name
        if not path.exists():
            save_image(synth_image(seed * 1_000_003 + i, size), path)
        names.append(name)
    return names

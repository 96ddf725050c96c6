"""Base predictors for the residual factorization.

The diffusion model learns the residual between the ground truth and the
output of a frozen base predictor. The ablation grid swaps that predictor:

  none        all-zeros base; diffusion must model the whole image
  bilinear    bilinear interpolation, no learned parameters
  bicubic     bicubic interpolation, no learned parameters
  srcnn_mini  small 9-1-5 conv net on top of bicubic interpolation
  simplesr    the pixel-shuffle CNN from simplesr.py (pretrained)

Every predictor maps a (B, 3, h, w) LR batch to a (B, 3, h*s, w*s) base
image in [-1, 1]-ish range; learned ones clamp at eval time.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import upsample
from .errors import ConfigError
from .simplesr import SimpleSR, SimpleSRConfig

PREDICTOR_KINDS = ("none", "bilinear", "bicubic", "srcnn_mini", "simplesr")


class NullPredictor(nn.Module):
    """Zero base image: the no-residual control arm."""

    def __init__(self, scale: int):
        super().__init__()
        self.scale = scale

    def forward(self, lr: torch.Tensor) -> torch.Tensor:
        s = self.scale
        return torch.zeros(
            lr.shape[0], lr.shape[1], lr.shape[2] * s, lr.shape[3] * s,
            dtype=lr.dtype, device=lr.device,
        )


class InterpPredictor(nn.Module):
    def __init__(self, scale: int, mode: str):
        super().__init__()
        self.scale = scale
        self.mode = mode

    def forward(self, lr: torch.Tensor) -> torch.Tensor:
        return upsample(lr, self.scale, self.mode)


class SrcnnMini(nn.Module):
    """9-1-5 conv stack on a bicubic-upsampled input, with a global skip.

    The output conv is zero-initialized so the untrained net equals bicubic
    interpolation, mirroring the init convention of SimpleSR.
    """

    def __init__(self, scale: int, width: int = 32):
        super().__init__()
        self.scale = scale
        self.conv1 = nn.Conv2d(3, width, 9, padding=4)
        self.conv2 = nn.Conv2d(width, width // 2, 1)
        self.conv3 = nn.Conv2d(width // 2, 3, 5, padding=2)
        nn.init.zeros_(self.conv3.weight)
        nn.init.zeros_(self.conv3.bias)

    def forward(self, lr: torch.Tensor) -> torch.Tensor:
        base = upsample(lr, self.scale, "bicubic")
        h = F.relu(self.conv1(base))
        h = F.relu(self.conv2(h))
        out = base + self.conv3(h)
        if not self.training:
            out = out.clamp(-1.0, 1.0)
        return out


def build_predictor(kind: str, scale: int) -> nn.Module:
    if kind == "none":
        return NullPredictor(scale)
    if kind in ("bilinear", "bicubic"):
        return InterpPredictor(scale, kind)
    if kind == "srcnn_mini":
        return SrcnnMini(scale)
    if kind == "simplesr":
        return SimpleSR(SimpleSRConfig(scale=scale))
    raise ConfigError(f"unknown base predictor {kind!r}; expected one of {PREDICTOR_KINDS}")


def is_trainable(kind: str) -> bool:
    return kind in ("srcnn_mini", "simplesr")


def freeze(module: nn.Module) -> nn.Module:
    """Freeze a base predictor for diffusion training: eval mode, no grads."""
    module.eval()
    for param in module.parameters():
        param.requires_grad_(False)
    return module


def prepare_conditioning(kind: str, predictor: nn.Module, x_lr: torch.Tensor,
                         scale: int) -> tuple[torch.Tensor, torch.Tensor]:
    """(base, cond) for a LR batch.

    base is added back after residual sampling; cond is what the denoiser
    sees. The zero-base control arm still needs LR information to condition
    on, so it gets the bicubic upsample there; every other predictor
    conditions on its own output.
    """
    with torch.no_grad():
        base = predictor(x_lr)
    if kind == "none":
        cond = upsample(x_lr, scale, "bicubic")
    else:
        cond = base
    return base, cond


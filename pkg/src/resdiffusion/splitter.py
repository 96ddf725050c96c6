"""Frequency-domain information splitter.

Given the base prediction x_cnn and the noisy input x_t, this module
prepares the five-map conditioning stack for the denoiser:

  x_hf   high-frequency part of x_cnn: its spectrum through an adaptive
         Gaussian high-pass whose width comes from a gated read of the
         magnitude spectrum
  x_lf   x_cnn scaled by channel gates computed from the magnitude spectrum
  x_td   x_t scaled by channel gates computed from the timestep embedding
  x_cnn  passed through unchanged
  x_t    passed through unchanged

All gates are sigmoid outputs, so they lie strictly inside (0, 1). The
module is stateless across calls: identical inputs yield identical outputs.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .transforms import Spectrum, apply_filter, fft2d, gaussian_highpass, ifft2d
from .unet import sinusoidal_embedding


class ResSE(nn.Module):
    """Squeeze-and-excitation channel gating with an identity skip.

    forward(x) = x + x * g(x) where g(x) are per-channel sigmoid gates from
    globally pooled statistics. The reduction keeps at least one hidden
    unit, so tiny channel counts (RGB) still work.
    """

    def __init__(self, channels: int, reduction: int = 16):
        super().__init__()
        if channels < 1:
            raise ValueError(f"channels must be >= 1, got {channels}")
        hidden = max(1, channels // reduction)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def gates(self, x: torch.Tensor) -> torch.Tensor:
        """Per-channel gates in (0, 1), shaped (B, C, 1, 1)."""
        if x.ndim != 4:
            raise ValueError(f"expected (B, C, H, W), got shape {tuple(x.shape)}")
        pooled = x.mean(dim=(-2, -1))
        g = torch.sigmoid(self.fc2(F.relu(self.fc1(pooled))))
        return g[:, :, None, None]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + x * self.gates(x)


class TimeGate(nn.Module):
    """Per-channel gates in (0, 1) derived from the sinusoidal embedding of t."""

    def __init__(self, channels: int, time_dim: int = 32):
        super().__init__()
        self.time_dim = time_dim
        self.fc1 = nn.Linear(time_dim, time_dim)
        self.fc2 = nn.Linear(time_dim, channels)

    def gates(self, t: torch.Tensor) -> torch.Tensor:
        emb = sinusoidal_embedding(t, self.time_dim)
        g = torch.sigmoid(self.fc2(F.relu(self.fc1(emb))))
        return g[:, :, None, None]

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        return self.gates(t)


def adaptive_sigma(spectrum: Spectrum, resse: nn.Module) -> torch.Tensor:
    """Data-dependent high-pass width, one scalar per image.

    sigma = min(mean|resse(|M|)| + l/2, l) with l = min(H, W), which pins
    sigma into [l/2, l]: the additive l/2 floors it and the min() caps it.
    The reduction over the gated magnitude map is a global mean.
    """
    mag = spectrum.coefficients.abs()
    if mag.ndim != 4:
        raise ValueError(f"adaptive_sigma expects a (B, C, H, W) spectrum, got {tuple(mag.shape)}")
    h, w = spectrum.spatial_shape
    limit = float(min(h, w))
    reduced = resse(mag).abs().mean(dim=(-3, -2, -1))
    return torch.clamp(reduced + limit / 2.0, max=limit)


@dataclass
class SplitterOutput:
    x_hf: torch.Tensor
    x_lf: torch.Tensor
    x_t_denoised: torch.Tensor
    stacked: torch.Tensor
    sigma: torch.Tensor


class FrequencySplitter(nn.Module):
    """Builds the 5C-channel conditioning stack from (x_cnn, x_t, t).

    Three independent parameter sets: the sigma path ResSE, the
    low-frequency gating ResSE, and the timestep gate.
    """

    def __init__(self, channels: int = 3, reduction: int = 16, time_dim: int = 32):
        super().__init__()
        self.channels = channels
        self.sigma_se = ResSE(channels, reduction)
        self.lf_se = ResSE(channels, reduction)
        self.time_gate = TimeGate(channels, time_dim)

    def forward(self, x_cnn: torch.Tensor, x_t: torch.Tensor, t: torch.Tensor) -> SplitterOutput:
        if x_cnn.shape != x_t.shape:
            raise ValueError(f"x_cnn shape {tuple(x_cnn.shape)} != x_t shape {tuple(x_t.shape)}")
        if x_cnn.ndim != 4:
            raise ValueError(f"expected (B, C, H, W), got shape {tuple(x_cnn.shape)}")

        spectrum = fft2d(x_cnn)
        magnitude = spectrum.coefficients.abs()
        sigma = adaptive_sigma(spectrum, self.sigma_se)
        h, w = spectrum.spatial_shape
        x_hf = ifft2d(apply_filter(spectrum, gaussian_highpass(h, w, sigma)))
        x_lf = self.lf_se.gates(magnitude) * x_cnn
        x_td = self.time_gate(t) * x_t
        stacked = torch.cat([x_hf, x_lf, x_td, x_cnn, x_t], dim=1)
        return SplitterOutput(x_hf=x_hf, x_lf=x_lf, x_t_denoised=x_td, stacked=stacked, sigma=sigma)

"""Residual-structure diffusion for single-image super-resolution.

A small pretrained CNN restores the low-frequency content of the upscaled
image; a frequency-guided DDPM generates the residual to ground truth on
top of it. The package covers the full desk-scale loop: base-CNN
pretraining with spectral losses, diffusion training, ancestral sampling,
PSNR/SSIM evaluation, and a component-ablation harness.
"""

from .config import RunConfig, parse_config, write_config
from .denoiser import ResidualDenoiser
from .diffusion import DiffusionSchedule, make_schedule, q_sample, sample
from .losses import LossWeights, loss_cnn, loss_dwt, loss_fft, loss_gt
from .metrics import psnr, ssim
from .simplesr import SimpleSR, SimpleSRConfig
from .splitter import FrequencySplitter, ResSE, adaptive_sigma
from .transforms import dwt_haar, fft2d, gaussian_highpass, idwt_haar, ifft2d
from .unet import HighFreqCrossAttention, NoiseUNet, UNetConfig

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "parse_config", "write_config",
    "ResidualDenoiser",
    "DiffusionSchedule", "make_schedule", "q_sample", "sample",
    "LossWeights", "loss_cnn", "loss_dwt", "loss_fft", "loss_gt",
    "psnr", "ssim",
    "SimpleSR", "SimpleSRConfig",
    "FrequencySplitter", "ResSE", "adaptive_sigma",
    "dwt_haar", "fft2d", "gaussian_highpass", "idwt_haar", "ifft2d",
    "HighFreqCrossAttention", "NoiseUNet", "UNetConfig",
    "__version__",
]

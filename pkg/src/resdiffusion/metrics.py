"""Distortion metrics.

PSNR is computed per element over all channels; SSIM follows the standard
recipe (11x11 Gaussian window, sigma 1.5, stabilizers C1 = (0.01 max)^2 and
C2 = (0.03 max)^2) on the ITU-R 601 luma of color inputs. Both expect
images rescaled to [0, 1]; evaluation code converts from the package's
[-1, 1] convention first.

Inputs are channel-first arrays or tensors: (H, W), (1, H, W), or
(3, H, W).
"""

import math

import numpy as np
import torch

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _as_array(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def psnr(a, b, max_value: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are equal."""
    a = _as_array(a)
    b = _as_array(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / mse)


def luma(image) -> np.ndarray:
    """ITU-R 601 luma of a channel-first image; grayscale passes through."""
    arr = _as_array(image)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[0] == 1:
        return arr[0]
    if arr.ndim == 3 and arr.shape[0] == 3:
        return np.tensordot(_LUMA_WEIGHTS, arr, axes=1)
    raise ValueError(f"expected (H, W), (1, H, W) or (3, H, W), got {arr.shape}")


def _gaussian_kernel_1d(radius: int, sigma: float) -> np.ndarray:
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(k**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable 'valid' convolution; the kernel is symmetric so correlation
    # and convolution coincide
    r = len(g) // 2
    h, w = img.shape
    rows = np.zeros((h, w - 2 * r))
    for k, gk in enumerate(g):
        rows += gk * img[:, k : w - 2 * r + k]
    out = np.zeros((h - 2 * r, w - 2 * r))
    for k, gk in enumerate(g):
        out += gk * rows[k : h - 2 * r + k, :]
    return out


def ssim(a, b, max_value: float = 1.0) -> float:
    """Mean local structural similarity; 1.0 for identical images."""
    x = luma(a)
    y = luma(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for the local window, got {x.shape}"
        )
    g = _gaussian_kernel_1d(SSIM_WINDOW // 2, SSIM_SIGMA)
    ux = _filter_valid(x, g)
    uy = _filter_valid(y, g)
    uxx = _filter_valid(x * x, g)
    uyy = _filter_valid(y * y, g)
    uxy = _filter_valid(x * y, g)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    c1 = (0.01 * max_value) ** 2
    c2 = (0.03 * max_value) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux**2 + uy**2 + c1) * (vx + vy + c2))
    return float(s.mean())

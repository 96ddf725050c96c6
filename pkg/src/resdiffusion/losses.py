"""Pre-training losses for the initial-prediction CNN.

Three terms, all realized as element means so the scale is independent of
patch size:

  * spatial MSE between prediction and target;
  * MSE between FFT magnitude spectra (phase is discarded); the spectra
    are orthonormalized (divided by sqrt(H*W)) so this term shares the
    pixel-MSE scale regardless of patch size, keeping the default weights
    meaningful;
  * summed MSE over the Haar detail bands of each decomposition level
    (approximation bands excluded; the orthonormal transform already
    preserves scale).

The combined loss weights the two frequency terms with ``alpha`` and
``beta``. All losses are differentiable with respect to the prediction;
magnitudes use ``sqrt(|z|^2 + eps^2)`` so the gradient is defined at zero
coefficients.
"""

from dataclasses import dataclass

import torch

from .transforms import dwt_haar

MAGNITUDE_EPS = 1e-8


@dataclass
class LossWeights:
    """Weights of the combined CNN loss and the DWT depth it uses."""

    alpha: float = 0.1
    beta: float = 0.1
    dwt_levels: int = 2

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"loss weights must be non-negative, got alpha={self.alpha}, beta={self.beta}")
        if self.dwt_levels < 1:
            raise ValueError(f"dwt_levels must be >= 1, got {self.dwt_levels}")


def _check_same_shape(predicted: torch.Tensor, target: torch.Tensor) -> None:
    if predicted.shape != target.shape:
        raise ValueError(
            f"shape mismatch: predicted {tuple(predicted.shape)} vs target {tuple(target.shape)}"
        )


def _smooth_magnitude(z: torch.Tensor) -> torch.Tensor:
    return torch.sqrt(z.real**2 + z.imag**2 + MAGNITUDE_EPS**2)


def loss_gt(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Spatial-domain MSE, element mean."""
    _check_same_shape(predicted, target)
    return ((predicted - target) ** 2).mean()


def loss_fft(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """MSE between orthonormalized 2D FFT magnitude spectra."""
    _check_same_shape(predicted, target)
    mag_pred = _smooth_magnitude(torch.fft.fft2(predicted, norm="ortho"))
    mag_target = _smooth_magnitude(torch.fft.fft2(target, norm="ortho"))
    return ((mag_pred - mag_target) ** 2).mean()


def loss_dwt(predicted: torch.Tensor, target: torch.Tensor, levels: int) -> torch.Tensor:
    """Sum over levels of the per-band MSEs between Haar detail coefficients.

    Approximation (ll) bands are excluded, so the loss is blind to constant
    offsets.
    """
    _check_same_shape(predicted, target)
    pyr_pred = dwt_haar(predicted, levels)
    pyr_target = dwt_haar(target, levels)
    total = predicted.new_zeros(())
    for (hp, vp, dp), (ht, vt, dt) in zip(pyr_pred.details, pyr_target.details):
        total = total + ((hp - ht) ** 2).mean() + ((vp - vt) ** 2).mean() + ((dp - dt) ** 2).mean()
    return total


def loss_cnn(predicted: torch.Tensor, target: torch.Tensor, weights: LossWeights) -> torch.Tensor:
    """Weighted combination: spatial + alpha * FFT + beta * DWT."""
    total = loss_gt(predicted, target)
    if weights.alpha != 0.0:
        total = total + weights.alpha * loss_fft(predicted, target)
    if weights.beta != 0.0:
        total = total + weights.beta * loss_dwt(predicted, target, weights.dwt_levels)
    return total

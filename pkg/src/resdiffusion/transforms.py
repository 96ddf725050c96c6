"""Invertible frequency-domain primitives: 2D FFT, multilevel Haar DWT, and
the Gaussian high-pass filter shared by the spectral losses and the
frequency splitter.

Images are torch tensors with spatial dimensions last: ``(H, W)``,
``(C, H, W)`` or ``(B, C, H, W)``. All operations are pure functions and
autograd-friendly, so they can sit inside loss graphs and model forwards.

Conventions:
  * forward FFT is unnormalized, the inverse carries the 1/(H*W) factor
    (so Parseval reads ``sum|x|^2 == sum|M|^2 / (H*W)``);
  * the Haar decomposition is orthonormal (band energies sum to the image
    energy) and halves the spatial size per level;
  * filter responses are DC-centered: distance is measured to the array
    center ``(H//2, W//2)``, which is where ``fftshift`` puts DC.
"""

from dataclasses import dataclass, field

import torch

from .errors import NumericError


def _check_spatial(x: torch.Tensor, what: str) -> None:
    if x.ndim < 2:
        raise ValueError(f"{what} must have at least 2 spatial dimensions, got shape {tuple(x.shape)}")
    if x.shape[-1] == 0 or x.shape[-2] == 0:
        raise ValueError(f"{what} has an empty spatial dimension: shape {tuple(x.shape)}")


@dataclass
class Spectrum:
    """Complex 2D transform coefficients plus their layout.

    ``centered=False`` is the natural FFT layout (DC at index [0, 0]);
    ``centered=True`` means the coefficients have been fftshifted so DC sits
    at ``(H//2, W//2)``.
    """

    coefficients: torch.Tensor
    centered: bool = False

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.coefficients.shape[-2], self.coefficients.shape[-1]

    def to_centered(self) -> "Spectrum":
        if self.centered:
            return self
        return Spectrum(torch.fft.fftshift(self.coefficients, dim=(-2, -1)), centered=True)

    def to_natural(self) -> "Spectrum":
        if not self.centered:
            return self
        return Spectrum(torch.fft.ifftshift(self.coefficients, dim=(-2, -1)), centered=False)


@dataclass
class WaveletPyramid:
    """Multilevel orthonormal Haar decomposition.

    ``details[i]`` holds the level-(i+1) horizontal, vertical, and diagonal
    detail bands at spatial size ``(H / 2^(i+1), W / 2^(i+1))``; ``ll`` is the
    approximation left after the final level.
    """

    ll: torch.Tensor
    details: list[tuple[torch.Tensor, torch.Tensor, torch.Tensor]] = field(default_factory=list)

    @property
    def levels(self) -> int:
        return len(self.details)


@dataclass
class HighPassFilter:
    """DC-centered filter response with values in [0, 1).

    ``response`` is ``(H, W)``, or ``(B, H, W)`` when built from a per-image
    sigma batch.
    """

    response: torch.Tensor
    sigma: torch.Tensor


def fft2d(image: torch.Tensor) -> Spectrum:
    """Unnormalized forward 2D FFT over the trailing spatial dimensions."""
    _check_spatial(image, "fft2d input")
    return Spectrum(torch.fft.fft2(image), centered=False)


def ifft2d(spectrum: Spectrum, assert_real_tol: float | None = None) -> torch.Tensor:
    """Inverse 2D FFT (1/(H*W)-normalized); returns the real part.

    With ``assert_real_tol`` set, raises :class:`NumericError` if the
    imaginary residue exceeds the tolerance. Use it when the spectrum is
    known to be conjugate-symmetric (a real image through a symmetric
    filter) and a large residue would indicate a bug.
    """
    _check_spatial(spectrum.coefficients, "ifft2d input")
    coeffs = spectrum.to_natural().coefficients
    out = torch.fft.ifft2(coeffs)
    if assert_real_tol is not None:
        residue = out.imag.abs().max().item()
        if residue > assert_real_tol:
            raise NumericError(
                f"inverse FFT imaginary residue {residue:.3e} exceeds tolerance {assert_real_tol:.3e}"
            )
    return out.real


def dwt_haar(image: torch.Tensor, levels: int) -> WaveletPyramid:
    """Orthonormal multilevel Haar decomposition.

    Per 2x2 block [[a, b], [c, d]] the level-1 coefficients are
        ll = (a+b+c+d)/2,  h = (a-b+c-d)/2,
        v  = (a+b-c-d)/2,  d = (a-b-c+d)/2,
    and the ll band is decomposed recursively. Spatial dims must be
    divisible by ``2**levels``.
    """
    _check_spatial(image, "dwt_haar input")
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    h, w = image.shape[-2], image.shape[-1]
    div = 1 << levels
    if h % div or w % div:
        raise ValueError(
            f"spatial dimensions must be divisible by 2**levels = {div}; got {h}x{w}"
        )
    details = []
    ll = image
    for _ in range(levels):
        a = ll[..., 0::2, 0::2]
        b = ll[..., 0::2, 1::2]
        c = ll[..., 1::2, 0::2]
        d = ll[..., 1::2, 1::2]
        details.append(((a - b + c - d) / 2, (a + b - c - d) / 2, (a - b - c + d) / 2))
        ll = (a + b + c + d) / 2
    return WaveletPyramid(ll=ll, details=details)


def idwt_haar(pyramid: WaveletPyramid) -> torch.Tensor:
    """Exact inverse of :func:`dwt_haar`."""
    if pyramid.levels < 1:
        raise ValueError("pyramid has no detail levels")
    ll = pyramid.ll
    for hb, vb, db in reversed(pyramid.details):
        if hb.shape != vb.shape or hb.shape != db.shape or hb.shape != ll.shape:
            raise ValueError(
                "inconsistent band shapes: "
                f"ll {tuple(ll.shape)}, h {tuple(hb.shape)}, v {tuple(vb.shape)}, d {tuple(db.shape)}"
            )
        a = (ll + hb + vb + db) / 2
        b = (ll - hb + vb - db) / 2
        c = (ll + hb - vb - db) / 2
        d = (ll - hb - vb + db) / 2
        # interleave columns then rows to undo the 2x2 block split
        top = torch.stack([a, b], dim=-1).reshape(*a.shape[:-1], 2 * a.shape[-1])
        bottom = torch.stack([c, d], dim=-1).reshape(*c.shape[:-1], 2 * c.shape[-1])
        ll = torch.stack([top, bottom], dim=-2).reshape(
            *top.shape[:-2], 2 * top.shape[-2], top.shape[-1]
        )
    return ll


def highpass_response(height: int, width: int, sigma: torch.Tensor) -> torch.Tensor:
    """DC-centered Gaussian high-pass response ``1 - exp(-D^2 / (2 sigma^2))``.

    ``D`` is the Euclidean distance to the array center ``(H//2, W//2)``.
    ``sigma`` may be a scalar tensor or a batch ``(B,)``; the response is
    ``(H, W)`` or ``(B, H, W)`` accordingly, and gradients flow through
    ``sigma``.
    """
    if height < 1 or width < 1:
        raise ValueError(f"filter grid must be non-empty, got {height}x{width}")
    yy = torch.arange(height, dtype=sigma.dtype) - height // 2
    xx = torch.arange(width, dtype=sigma.dtype) - width // 2
    dist_sq = yy[:, None] ** 2 + xx[None, :] ** 2
    if sigma.ndim == 0:
        return 1.0 - torch.exp(-dist_sq / (2.0 * sigma**2))
    return 1.0 - torch.exp(-dist_sq[None] / (2.0 * sigma[:, None, None] ** 2))


def gaussian_highpass(height: int, width: int, sigma: float | torch.Tensor) -> HighPassFilter:
    """Build the adaptive Gaussian high-pass filter for an HxW grid.

    The response is exactly 0 at the DC position and grows monotonically
    with distance from the center, staying strictly below 1.
    """
    sigma_t = torch.as_tensor(sigma, dtype=torch.get_default_dtype())
    if not torch.is_floating_point(sigma_t):
        sigma_t = sigma_t.float()
    if (sigma_t <= 0).any():
        raise ValueError(f"sigma must be positive, got {sigma}")
    return HighPassFilter(response=highpass_response(height, width, sigma_t), sigma=sigma_t)


def apply_filter(spectrum: Spectrum, filt: HighPassFilter) -> Spectrum:
    """Element-wise product of a spectrum with a DC-centered real response.

    The spectrum is shifted to the centered layout for the multiplication
    and returned in its original layout. The response broadcasts over the
    channel dimension; a ``(B, H, W)`` response pairs with ``(B, C, H, W)``
    coefficients.
    """
    coeffs = spectrum.coefficients
    resp = filt.response
    if resp.shape[-2:] != coeffs.shape[-2:]:
        raise ValueError(
            f"filter spatial shape {tuple(resp.shape[-2:])} does not match "
            f"spectrum spatial shape {tuple(coeffs.shape[-2:])}"
        )
    if resp.ndim == 3:
        if coeffs.ndim != 4 or resp.shape[0] != coeffs.shape[0]:
            raise ValueError(
                f"batched response {tuple(resp.shape)} requires (B, C, H, W) "
                f"coefficients with matching batch, got {tuple(coeffs.shape)}"
            )
        resp = resp[:, None]
    centered = spectrum.to_centered()
    filtered = centered.coefficients * resp
    out = Spectrum(filtered, centered=True)
    return out if spectrum.centered else out.to_natural()

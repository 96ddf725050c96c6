"""DDPM algebra on the residual target and the ancestral sampling loop.

The diffusion target is r0 = (y_hr - base) / gain with the base image from
a frozen predictor; sampling inverts that map and returns
clamp(base + gain * r0_hat). Timesteps are 1-based: t runs over [1, T].

Schedule arrays are kept in float64 so products and posterior ratios stay
accurate for large T; values are cast to the image dtype on use.
"""

from dataclasses import dataclass

import torch

from .seeding import STREAM_SAMPLE, generator_for, seed_for


@dataclass
class DiffusionSchedule:
    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_bars: torch.Tensor
    posterior_variance: torch.Tensor

    @property
    def timesteps(self) -> int:
        return self.betas.shape[0]


def make_schedule(timesteps: int, beta_start: float, beta_end: float) -> DiffusionSchedule:
    """Linear beta schedule with the usual derived arrays.

    posterior_variance[0] (the t=1 step) is defined as 0: the final
    sampling step adds no noise.
    """
    if timesteps < 1:
        raise ValueError(f"timesteps must be >= 1, got {timesteps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]")
    betas = torch.linspace(beta_start, beta_end, timesteps, dtype=torch.float64)
    alphas = 1.0 - betas
    alpha_bars = torch.cumprod(alphas, dim=0)
    prev = torch.cat([torch.ones(1, dtype=torch.float64), alpha_bars[:-1]])
    posterior_variance = betas * (1.0 - prev) / (1.0 - alpha_bars)
    return DiffusionSchedule(betas, alphas, alpha_bars, posterior_variance)


def _at(values: torch.Tensor, t: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    """Index a 1-based timestep batch into a schedule array, broadcastable."""
    if (t < 1).any() or (t > values.shape[0]).any():
        raise ValueError(f"timesteps must lie in [1, {values.shape[0]}]")
    out = values[t.long() - 1].to(like.dtype)
    return out.view(-1, *([1] * (like.ndim - 1)))


def q_sample(r0: torch.Tensor, t: torch.Tensor, eps: torch.Tensor,
             schedule: DiffusionSchedule) -> torch.Tensor:
    """Forward noising: r_t = sqrt(abar_t) r0 + sqrt(1 - abar_t) eps."""
    if eps.shape != r0.shape:
        raise ValueError(f"eps shape {tuple(eps.shape)} != r0 shape {tuple(r0.shape)}")
    abar = _at(schedule.alpha_bars, t, r0)
    return abar.sqrt() * r0 + (1.0 - abar).sqrt() * eps


def invert_q_sample(r_t: torch.Tensor, t: torch.Tensor, eps: torch.Tensor,
                    schedule: DiffusionSchedule) -> torch.Tensor:
    """Algebraic inverse of q_sample given the exact injected noise."""
    abar = _at(schedule.alpha_bars, t, r_t)
    return (r_t - (1.0 - abar).sqrt() * eps) / abar.sqrt()


def _batch_randn(shape: tuple[int, ...], generators: list[torch.Generator],
                 dtype: torch.dtype) -> torch.Tensor:
    """Stack per-image standard-normal draws, one generator per image.

    Keeping streams per image makes each output independent of the batch
    composition around it.
    """
    if len(generators) != shape[0]:
        raise ValueError(f"need {shape[0]} generators, got {len(generators)}")
    draws = [torch.randn(shape[1:], generator=g, dtype=dtype) for g in generators]
    return torch.stack(draws)


def ancestral_sample(eps_fn, schedule: DiffusionSchedule, *,
                     init: torch.Tensor | None = None,
                     shape: tuple[int, ...] | None = None,
                     generators: list[torch.Generator] | None = None,
                     dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Reverse-process sampling; returns the denoised r0 estimate.

    x_T comes from ``init`` if given, else N(0, I) via ``generators``.
    Each step uses mu = (x_t - beta_t/sqrt(1-abar_t) * eps_hat)/sqrt(alpha_t)
    and adds posterior noise except at t = 1.
    """
    if init is None:
        if shape is None or generators is None:
            raise ValueError("need either init or (shape and generators)")
        x = _batch_randn(shape, generators, dtype)
    else:
        x = init
    with torch.no_grad():
        for step in range(schedule.timesteps, 0, -1):
            t = torch.full((x.shape[0],), step, dtype=torch.long)
            eps_hat = eps_fn(x, t)
            if eps_hat.shape != x.shape:
                raise ValueError(
                    f"eps_fn returned shape {tuple(eps_hat.shape)}, expected {tuple(x.shape)}"
                )
            beta = _at(schedule.betas, t, x)
            alpha = _at(schedule.alphas, t, x)
            abar = _at(schedule.alpha_bars, t, x)
            mean = (x - beta / (1.0 - abar).sqrt() * eps_hat) / alpha.sqrt()
            if step > 1:
                if generators is None:
                    raise ValueError("generators are required when timesteps > 1")
                var = _at(schedule.posterior_variance, t, x)
                noise = _batch_randn(tuple(x.shape), generators, x.dtype)
                x = mean + var.sqrt() * noise
            else:
                x = mean
    return x


def image_seeds_for(base_seed: int, indices: list[int], variant: int = 0) -> list[int]:
    """Named per-image sampling seeds; recorded in sample manifests."""
    return [seed_for(base_seed, STREAM_SAMPLE, variant, idx) for idx in indices]


def sample_residual(model, x_cond: torch.Tensor, schedule: DiffusionSchedule,
                    image_seeds: list[int], eps_fn=None) -> torch.Tensor:
    """Sample r0_hat for a conditioning batch under explicit per-image seeds."""
    generators = [generator_for(s) for s in image_seeds]
    if eps_fn is None:
        def eps_fn(x, t):
            return model(x, x_cond, t)
    return ancestral_sample(eps_fn, schedule, shape=tuple(x_cond.shape),
                            generators=generators, dtype=x_cond.dtype)


def sample(x_lr: torch.Tensor, base: torch.Tensor, cond: torch.Tensor, model,
           schedule: DiffusionSchedule, image_seeds: list[int], *,
           gain: float = 2.0, clamp: bool = True) -> torch.Tensor:
    """Full restoration: diffuse the residual, add the base back, clamp.

    ``base``/``cond`` come from the frozen predictor (see
    predictors.prepare_conditioning); x_lr is accepted for the shape check
    only, keeping the call signature honest about its inputs.
    """
    if base.shape != cond.shape:
        raise ValueError(f"base shape {tuple(base.shape)} != cond shape {tuple(cond.shape)}")
    if base.shape[0] != x_lr.shape[0]:
        raise ValueError("base batch does not match x_lr batch")
    was_training = getattr(model, "training", False)
    if hasattr(model, "eval"):
        model.eval()
    try:
        r0_hat = sample_residual(model, cond, schedule, image_seeds)
    finally:
        if was_training and hasattr(model, "train"):
            model.train()
    out = base + gain * r0_hat
    return out.clamp(-1.0, 1.0) if clamp else out

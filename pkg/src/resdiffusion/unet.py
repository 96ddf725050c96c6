"""Noise-prediction U-net.

Encoder levels live at spatial size HR/2^i for i = 0..depth; skips are
collected at levels 1..depth so each skip aligns with the matching detail
level of a Haar decomposition of the base prediction. Decoder levels apply
cross-attention (queries from the summed detail bands, keys/values from the
skip features) before concatenation. Self-attention sits at the bottleneck
by default. Timestep conditioning is a sinusoidal embedding mapped through
a small MLP, then a per-block affine (scale, shift) on the second norm.

The final conv is zero-initialized, so an untrained model predicts zero
noise and its epsilon-MSE starts near 1.
"""

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import NumericError
from .transforms import dwt_haar

# Per-level (horizontal, vertical, diagonal) detail triples, finest first.
HFGuidance = list[tuple[torch.Tensor, torch.Tensor, torch.Tensor]]


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Classic transformer position encoding of timesteps, shape (B, dim)."""
    if dim < 2 or dim % 2:
        raise ValueError(f"embedding dim must be even and >= 2, got {dim}")
    if t.ndim != 1:
        raise ValueError(f"expected (B,) timesteps, got shape {tuple(t.shape)}")
    half = dim // 2
    exponent = -math.log(10000.0) * torch.arange(half, dtype=torch.float32) / max(half - 1, 1)
    args = t.float()[:, None] * torch.exp(exponent)[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


def wavelet_guidance(x_cnn: torch.Tensor, levels: int) -> HFGuidance:
    """Detail triples of x_cnn for levels 1..levels (finest first)."""
    return dwt_haar(x_cnn, levels).details


@dataclass
class UNetConfig:
    depth: int = 3
    base_channels: int = 64
    channel_mults: tuple[int, ...] = field(default_factory=tuple)
    self_attention_levels: tuple[int, ...] = field(default_factory=tuple)
    time_dim: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        if not self.channel_mults:
            self.channel_mults = tuple(2**i for i in range(self.depth + 1))
        self.channel_mults = tuple(int(m) for m in self.channel_mults)
        if len(self.channel_mults) != self.depth + 1:
            raise ValueError(
                f"channel_mults needs depth+1 = {self.depth + 1} entries, got {self.channel_mults}"
            )
        if not self.self_attention_levels:
            self.self_attention_levels = (self.depth,)
        self.self_attention_levels = tuple(int(a) for a in self.self_attention_levels)
        if any(a < 1 or a > self.depth for a in self.self_attention_levels):
            raise ValueError(
                f"self_attention_levels must lie in [1, depth={self.depth}], "
                f"got {self.self_attention_levels}"
            )
        if self.time_dim <= 0:
            self.time_dim = 4 * self.base_channels
        if self.time_dim % 2:
            raise ValueError(f"time_dim must be even, got {self.time_dim}")

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(self.base_channels * m for m in self.channel_mults)


def _norm(channels: int) -> nn.GroupNorm:
    for groups in (8, 4, 2, 1):
        if channels % groups == 0:
            return nn.GroupNorm(groups, channels)
    raise AssertionError("unreachable")


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int):
        super().__init__()
        self.norm1 = _norm(in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm2 = _norm(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.affine = nn.Linear(time_dim, 2 * out_ch)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        scale, shift = self.affine(temb)[:, :, None, None].chunk(2, dim=1)
        h = self.norm2(h) * (1.0 + scale) + shift
        h = self.conv2(F.silu(h))
        return h + self.skip(x)


class SelfAttention(nn.Module):
    """Single-head dot-product attention over spatial positions."""

    def __init__(self, channels: int):
        super().__init__()
        self.norm = _norm(channels)
        self.to_qkv = nn.Conv2d(channels, 3 * channels, 1)
        self.proj = nn.Conv2d(channels, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        q, k, v = self.to_qkv(self.norm(x)).chunk(3, dim=1)
        q = q.flatten(2).transpose(1, 2)
        k = k.flatten(2).transpose(1, 2)
        v = v.flatten(2).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(1, 2) / math.sqrt(c), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, c, h, w)
        return x + self.proj(out)


class HighFreqCrossAttention(nn.Module):
    """Cross-attention with queries from summed detail bands.

    The three orientation bands are added and the channel dimension summed,
    giving a single-channel high-frequency map; a 1x1 conv lifts it to the
    feature width, so d_k equals the feature channel count. Keys and values
    are separate 1x1 projections of the features. The attention output is
    added to the input features (no output projection), so forcing the
    query projection to zero reduces the block to features + spatial mean
    of the value rows.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.to_q = nn.Conv2d(1, channels, 1)
        self.to_k = nn.Conv2d(channels, channels, 1)
        self.to_v = nn.Conv2d(channels, channels, 1)

    def forward(
        self,
        features: torch.Tensor,
        guidance: tuple[torch.Tensor, torch.Tensor, torch.Tensor],
        return_weights: bool = False,
    ):
        h_band, v_band, d_band = guidance
        hf = (h_band + v_band + d_band).sum(dim=1, keepdim=True)
        if hf.shape[-2:] != features.shape[-2:]:
            raise ValueError(
                f"guidance spatial size {tuple(hf.shape[-2:])} does not match "
                f"feature size {tuple(features.shape[-2:])}"
            )
        b, c, h, w = features.shape
        q = self.to_q(hf).flatten(2).transpose(1, 2)
        k = self.to_k(features).flatten(2).transpose(1, 2)
        v = self.to_v(features).flatten(2).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(1, 2) / math.sqrt(c), dim=-1)
        out = features + (attn @ v).transpose(1, 2).reshape(b, c, h, w)
        if return_weights:
            return out, attn
        return out


class NoiseUNet(nn.Module):
    def __init__(self, config: UNetConfig, in_channels: int, out_channels: int = 3,
                 use_hf_ca: bool = True):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        self.use_hf_ca = use_hf_ca
        c = config.channels
        td = config.time_dim
        attn = set(config.self_attention_levels)

        self.time_mlp = nn.Sequential(nn.Linear(td, td), nn.SiLU(), nn.Linear(td, td))
        self.stem = nn.Conv2d(in_channels, c[0], 3, padding=1)
        self.enc_block0 = ResBlock(c[0], c[0], td)
        self.downs = nn.ModuleList()
        self.enc_blocks = nn.ModuleList()
        self.enc_attn = nn.ModuleDict()
        for i in range(1, config.depth + 1):
            self.downs.append(nn.Conv2d(c[i - 1], c[i], 3, stride=2, padding=1))
            self.enc_blocks.append(ResBlock(c[i], c[i], td))
            if i in attn and i < config.depth:
                self.enc_attn[str(i)] = SelfAttention(c[i])

        self.mid1 = ResBlock(c[-1], c[-1], td)
        self.mid_attn = SelfAttention(c[-1]) if config.depth in attn else None
        self.mid2 = ResBlock(c[-1], c[-1], td)

        self.cross_attn = nn.ModuleDict()
        self.fuse = nn.ModuleDict()
        self.dec_attn = nn.ModuleDict()
        self.ups = nn.ModuleDict()
        for i in range(config.depth, 0, -1):
            if use_hf_ca:
                self.cross_attn[str(i)] = HighFreqCrossAttention(c[i])
            self.fuse[str(i)] = ResBlock(2 * c[i], c[i], td)
            if i in attn and i < config.depth:
                self.dec_attn[str(i)] = SelfAttention(c[i])
            self.ups[str(i)] = nn.Sequential(
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(c[i], c[i - 1], 3, padding=1),
            )

        self.final_block = ResBlock(c[0], c[0], td)
        self.out_norm = _norm(c[0])
        self.out_conv = nn.Conv2d(c[0], out_channels, 3, padding=1)
        nn.init.zeros_(self.out_conv.weight)
        nn.init.zeros_(self.out_conv.bias)

    def forward(self, x: torch.Tensor, t: torch.Tensor, guidance: HFGuidance | None = None) -> torch.Tensor:
        depth = self.config.depth
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"expected (B, {self.in_channels}, H, W) input, got shape {tuple(x.shape)}"
            )
        if x.shape[-2] % 2**depth or x.shape[-1] % 2**depth:
            raise ValueError(
                f"spatial size {tuple(x.shape[-2:])} must be divisible by 2**depth = {2**depth}"
            )
        if self.use_hf_ca:
            if guidance is None or len(guidance) < depth:
                raise ValueError(f"need detail guidance for levels 1..{depth}")

        dtype = self.stem.weight.dtype
        temb = self.time_mlp(sinusoidal_embedding(t, self.config.time_dim).to(dtype))

        h = self.enc_block0(self.stem(x), temb)
        skips = []
        for i in range(1, depth + 1):
            h = self.downs[i - 1](h)
            h = self.enc_blocks[i - 1](h, temb)
            if str(i) in self.enc_attn:
                h = self.enc_attn[str(i)](h)
            skips.append(h)

        h = self.mid1(h, temb)
        if self.mid_attn is not None:
            h = self.mid_attn(h)
        h = self.mid2(h, temb)

        for i in range(depth, 0, -1):
            skip = skips[i - 1]
            if self.use_hf_ca:
                skip = self.cross_attn[str(i)](skip, guidance[i - 1])
            h = self.fuse[str(i)](torch.cat([h, skip], dim=1), temb)
            if str(i) in self.dec_attn:
                h = self.dec_attn[str(i)](h)
            h = self.ups[str(i)](h)

        h = self.final_block(h, temb)
        out = self.out_conv(F.silu(self.out_norm(h)))
        if not torch.isfinite(out).all() and not getattr(self, "_diagnosing", False):
            layer = self._first_nonfinite_layer(x, t, guidance)
            raise NumericError(f"non-finite denoiser output; first bad layer: {layer}")
        return out

    def _first_nonfinite_layer(self, x, t, guidance) -> str:
        """Re-run with hooks to name the first module emitting NaN/Inf."""
        offender: list[str] = []
        handles = []
        self._diagnosing = True

        def make_hook(name):
            def hook(_module, _inputs, output):
                if offender:
                    return
                outs = output if isinstance(output, tuple) else (output,)
                for o in outs:
                    if isinstance(o, torch.Tensor) and not torch.isfinite(o).all():
                        offender.append(name)
                        return
            return hook

        for name, module in self.named_modules():
            if name:
                handles.append(module.register_forward_hook(make_hook(name)))
        try:
            with torch.no_grad():
                self.forward(x, t, guidance)
        except NumericError:
            pass
        finally:
            self._diagnosing = False
            for handle in handles:
                handle.remove()
        return offender[0] if offender else "<output>"

"""Composite noise predictor: frequency splitter + guided U-net.

forward(r_t, x_cond, t) -> eps_hat. With the splitter enabled the U-net
sees the 5C-channel stack; disabled, it sees plain concat(x_cond, r_t).
With cross-attention enabled, Haar detail triples of x_cond feed each
decoder level. Both toggles are structural, so they are recorded in
checkpoint manifests and the model is rebuilt from those fields at load
time.
"""

import torch
import torch.nn as nn

from .errors import ConfigError
from .splitter import FrequencySplitter
from .unet import NoiseUNet, UNetConfig, wavelet_guidance


class ResidualDenoiser(nn.Module):
    def __init__(self, unet_config: UNetConfig, channels: int = 3,
                 use_splitter: bool = True, use_hf_ca: bool = True):
        super().__init__()
        self.channels = channels
        self.use_splitter = use_splitter
        self.use_hf_ca = use_hf_ca
        in_channels = 5 * channels if use_splitter else 2 * channels
        self.splitter = FrequencySplitter(channels) if use_splitter else None
        self.unet = NoiseUNet(unet_config, in_channels=in_channels,
                              out_channels=channels, use_hf_ca=use_hf_ca)

    def forward(self, r_t: torch.Tensor, x_cond: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        if r_t.shape != x_cond.shape:
            raise ValueError(
                f"noisy input shape {tuple(r_t.shape)} != conditioning shape {tuple(x_cond.shape)}"
            )
        guidance = None
        if self.use_hf_ca:
            guidance = wavelet_guidance(x_cond, self.unet.config.depth)
        if self.splitter is not None:
            stacked = self.splitter(x_cond, r_t, t).stacked
        else:
            stacked = torch.cat([x_cond, r_t], dim=1)
        return self.unet(stacked, t, guidance)

    def manifest_fields(self) -> dict[str, str]:
        cfg = self.unet.config
        return {
            "channels": str(self.channels),
            "splitter": "on" if self.use_splitter else "off",
            "hf_ca": "on" if self.use_hf_ca else "off",
            "unet.depth": str(cfg.depth),
            "unet.base_channels": str(cfg.base_channels),
            "unet.channel_mults": ",".join(str(m) for m in cfg.channel_mults),
            "unet.self_attention_levels": ",".join(str(a) for a in cfg.self_attention_levels),
            "unet.time_dim": str(cfg.time_dim),
        }


def denoiser_from_manifest(manifest: dict[str, str]) -> ResidualDenoiser:
    """Rebuild the exact architecture recorded by manifest_fields()."""
    try:
        config = UNetConfig(
            depth=int(manifest["unet.depth"]),
            base_channels=int(manifest["unet.base_channels"]),
            channel_mults=tuple(int(m) for m in manifest["unet.channel_mults"].split(",")),
            self_attention_levels=tuple(
                int(a) for a in manifest["unet.self_attention_levels"].split(",")
            ),
            time_dim=int(manifest["unet.time_dim"]),
        )
        return ResidualDenoiser(
            config,
            channels=int(manifest["channels"]),
            use_splitter=manifest["splitter"] == "on",
            use_hf_ca=manifest["hf_ca"] == "on",
        )
    except KeyError as exc:
        raise ConfigError(f"checkpoint manifest is missing field {exc}") from None

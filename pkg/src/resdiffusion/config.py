"""Run configuration: flat ``section.key = value`` text files.

Example:

    run.seed = 7
    run.out = runs/desk
    data.root = data/images
    data.scale = 4
    unet.depth = 2
    unet.base_channels = 32
    ablation.cnn = simplesr

Unknown keys are errors (typos must not silently fall back to defaults).
Every command writes the fully resolved config next to its outputs, and
that file parses back to an identical configuration.
"""

import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .losses import LossWeights
from .predictors import PREDICTOR_KINDS
from .unet import UNetConfig

_ON_OFF = ("on", "off")


@dataclass
class RunSection:
    seed: int = 0
    out: str = "runs/run0"


@dataclass
class DataConfig:
    root: str = "data/images"
    train_split: str = "data/splits/train.txt"
    val_split: str = "data/splits/val.txt"
    test_split: str = "data/splits/test.txt"
    scale: int = 4
    hr_patch: int = 64

    def __post_init__(self):
        if self.scale < 1:
            raise ConfigError(f"data.scale must be >= 1, got {self.scale}")
        if self.hr_patch % self.scale:
            raise ConfigError(
                f"data.hr_patch = {self.hr_patch} must be divisible by data.scale = {self.scale}"
            )


@dataclass
class SrSection:
    channels: int = 64
    blocks: int = 8


@dataclass
class DiffusionSection:
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    gain: float = 2.0

    def __post_init__(self):
        if self.gain <= 0:
            raise ConfigError(f"diffusion.gain must be positive, got {self.gain}")


@dataclass
class PretrainSection:
    steps: int = 1500
    batch_size: int = 8
    lr: float = 1e-3
    log_every: int = 25
    val_every: int = 500
    val_limit: int = 12
    checkpoint_every: int = 0


@dataclass
class TrainSection:
    steps: int = 2600
    batch_size: int = 4
    lr: float = 2e-4
    log_every: int = 50


@dataclass
class SampleSection:
    n_variants: int = 1
    batch_size: int = 8
    limit: int = 0


@dataclass
class AblationSection:
    cnn: str = "simplesr"
    splitter: str = "on"
    hf_ca: str = "on"
    cnn_loss: str = "full"
    variants: str = ""

    def __post_init__(self):
        if self.cnn not in PREDICTOR_KINDS:
            raise ConfigError(f"ablation.cnn must be one of {PREDICTOR_KINDS}, got {self.cnn!r}")
        if self.splitter not in _ON_OFF or self.hf_ca not in _ON_OFF:
            raise ConfigError("ablation.splitter and ablation.hf_ca must be 'on' or 'off'")
        if self.cnn_loss not in ("full", "gt_only"):
            raise ConfigError(f"ablation.cnn_loss must be 'full' or 'gt_only', got {self.cnn_loss!r}")


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    data: DataConfig = field(default_factory=DataConfig)
    sr: SrSection = field(default_factory=SrSection)
    loss: LossWeights = field(default_factory=LossWeights)
    unet: UNetConfig = field(default_factory=UNetConfig)
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    train: TrainSection = field(default_factory=TrainSection)
    sample: SampleSection = field(default_factory=SampleSection)
    ablation: AblationSection = field(default_factory=AblationSection)


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


def _convert(raw: str, target_type: type, key: str):
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is str:
            return raw
        if target_type is tuple:
            return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} is not a {target_type.__name__}") from None
    raise ConfigError(f"unsupported config field type for {key}")


def parse_config(path: str | os.PathLike,
                 overrides: dict[str, str] | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    raw: dict[str, dict[str, object]] = {name: {} for name in _SECTIONS}
    lines = list(enumerate(text.splitlines(), start=1))
    lines += [(0, f"{k} = {v}") for k, v in (overrides or {}).items()]
    for lineno, line in lines:
        where = f"{path}:{lineno}" if lineno else "override"
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'section.key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if "." not in key:
            raise ConfigError(f"{where}: key {key!r} is missing its section prefix")
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"{where}: unknown section {section!r}")
        defaults = _SECTIONS[section]()
        matching = [f for f in fields(defaults) if f.name == name]
        if not matching:
            raise ConfigError(f"{where}: unknown key {key!r}")
        target_type = type(getattr(defaults, name))
        raw[section][name] = _convert(value, target_type, key)
    try:
        sections = {name: _SECTIONS[name](**raw[name]) for name in _SECTIONS}
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(**sections)


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def config_items(cfg: RunConfig) -> list[tuple[str, str]]:
    items = []
    for section_field in fields(cfg):
        section = getattr(cfg, section_field.name)
        for f in fields(section):
            items.append((f"{section_field.name}.{f.name}", _format_value(getattr(section, f.name))))
    return items


def write_config(cfg: RunConfig, path: str | os.PathLike) -> None:
    lines = [f"{key} = {value}" for key, value in config_items(cfg)]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def replace_section(cfg: RunConfig, **section_updates) -> RunConfig:
    """New RunConfig with whole sections swapped (sections are frozen in spirit)."""
    return dataclasses.replace(cfg, **section_updates)

"""Component-ablation matrix: train, sample, and score each toggle set.

A variant spec is a comma-separated toggle list relative to the base
config, e.g. ``cnn=simplesr,splitter=off``; specs are separated by
semicolons. Each variant trains its own diffusion model; pretrained base
CNNs are cached per (cnn, cnn_loss) so variants sharing one do not retrain
it. The summary lands in ablation.csv, one row per variant.
"""

import dataclasses
from pathlib import Path

from .config import RunConfig, write_config
from .data import save_image
from .errors import ConfigError
from .evaluation import evaluate_dirs, write_ablation_csv
from .predictors import is_trainable
from .sampling import sample_directory
from .train import dataset_for, pretrain_cnn, restore_cnn, restore_denoiser, train_diffusion

DEFAULT_VARIANTS = (
    "cnn=none;cnn=bilinear;cnn=srcnn_mini;cnn=simplesr;"
    "cnn=simplesr,splitter=off;cnn=simplesr,hf_ca=off;cnn=simplesr,cnn_loss=gt_only"
)

_TOGGLE_KEYS = ("cnn", "splitter", "hf_ca", "cnn_loss")


def parse_variants(spec: str) -> list[dict[str, str]]:
    variants = []
    for chunk in (spec or DEFAULT_VARIANTS).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        toggles = {}
        for part in chunk.split(","):
            if "=" not in part:
                raise ConfigError(f"bad variant toggle {part!r} in {chunk!r}")
            key, _, value = part.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _TOGGLE_KEYS:
                raise ConfigError(f"unknown ablation toggle {key!r}; expected one of {_TOGGLE_KEYS}")
            toggles[key] = value
        variants.append(toggles)
    if not variants:
        raise ConfigError("ablation.variants parsed to an empty list")
    return variants


def variant_name(toggles: dict[str, str]) -> str:
    return "_".join(f"{k}-{toggles[k]}" for k in _TOGGLE_KEYS if k in toggles)


def apply_toggles(cfg: RunConfig, toggles: dict[str, str]) -> RunConfig:
    ablation = dataclasses.replace(cfg.ablation, variants="", **toggles)
    return dataclasses.replace(cfg, ablation=ablation)


def prepare_eval_inputs(cfg: RunConfig, out_root: Path, limit: int = 0) -> tuple[Path, Path]:
    """Write test-split LR inputs and HR references once, shared by variants."""
    lr_dir = out_root / "test_lr"
    hr_dir = out_root / "test_hr"
    if lr_dir.is_dir() and hr_dir.is_dir() and any(lr_dir.glob("*.png")):
        return lr_dir, hr_dir
    test_ds = dataset_for(cfg, cfg.data.test_split)
    lr_b, hr_b, names = test_ds.eval_pairs(limit or None)
    for i, name in enumerate(names):
        stem = Path(name).stem
        save_image(lr_b[i], lr_dir / f"{stem}.png")
        save_image(hr_b[i], hr_dir / f"{stem}.png")
    return lr_dir, hr_dir


def run_variant(cfg: RunConfig, out_dir: Path, lr_dir: Path, hr_dir: Path,
                cnn_checkpoint: Path | None) -> dict:
    """Train one toggle set end to end; returns its summary row."""
    ckpt_dir = train_diffusion(cfg, out_dir, cnn_checkpoint=cnn_checkpoint)
    model, schedule, gain, kind, _ = restore_denoiser(ckpt_dir)
    predictor = restore_cnn(kind, cfg.data.scale, cnn_checkpoint)
    sample_directory(model, schedule, gain, kind, predictor, cfg.data.scale,
                     lr_dir, out_dir, base_seed=cfg.run.seed,
                     n_variants=cfg.sample.n_variants,
                     batch_size=cfg.sample.batch_size,
                     limit=cfg.sample.limit, hr_dir=hr_dir)
    summary = evaluate_dirs(out_dir / "samples", hr_dir, out_dir / "eval.csv")
    return {
        "cnn": cfg.ablation.cnn,
        "splitter": cfg.ablation.splitter,
        "hf_ca": cfg.ablation.hf_ca,
        "cnn_loss": cfg.ablation.cnn_loss,
        "psnr_rgb": summary["psnr_rgb"],
        "ssim_luma": summary["ssim_luma"],
    }


def run_ablation(cfg: RunConfig, out_root: str | Path, progress=None) -> list[dict]:
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out_root / "resolved.cfg")
    variants = parse_variants(cfg.ablation.variants)
    lr_dir, hr_dir = prepare_eval_inputs(cfg, out_root, cfg.sample.limit)

    rows = []
    pretrained: dict[tuple[str, str], Path] = {}
    for toggles in variants:
        vcfg = apply_toggles(cfg, toggles)
        name = variant_name(toggles)
        if progress:
            progress(f"[ablate] variant {name}")
        cnn_ckpt = None
        if is_trainable(vcfg.ablation.cnn):
            key = (vcfg.ablation.cnn, vcfg.ablation.cnn_loss)
            if key not in pretrained:
                pre_dir = out_root / "pretrained" / f"{key[0]}_{key[1]}"
                pretrained[key] = pretrain_cnn(vcfg, pre_dir)
            cnn_ckpt = pretrained[key]
        row = run_variant(vcfg, out_root / "variants" / name, lr_dir, hr_dir, cnn_ckpt)
        rows.append({"variant": name, **row})
    write_ablation_csv(rows, out_root / "ablation.csv")
    return rows


def aggregate_ablation(root: str | Path, out_csv: str | Path) -> list[dict]:
    """Rebuild ablation.csv from existing variant run directories."""
    from .config import parse_config
    from .evaluation import read_eval_summary

    root = Path(root)
    variant_dirs = sorted(p for p in (root / "variants").glob("*") if p.is_dir())
    if not variant_dirs:
        raise ConfigError(f"no variant runs under {root}/variants")
    rows = []
    for vdir in variant_dirs:
        cfg = parse_config(vdir / "resolved.cfg")
        summary = read_eval_summary(vdir / "eval.csv")
        rows.append({
            "variant": vdir.name,
            "cnn": cfg.ablation.cnn,
            "splitter": cfg.ablation.splitter,
            "hf_ca": cfg.ablation.hf_ca,
            "cnn_loss": cfg.ablation.cnn_loss,
            "psnr_rgb": summary["psnr_rgb"],
            "ssim_luma": summary["ssim_luma"],
        })
    write_ablation_csv(rows, out_csv)
    return rows

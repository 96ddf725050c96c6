#!/usr/bin/env python3
"""Desk-scale component ablation on a synthetic corpus.

Generates a small deterministic corpus, trains the selected variants,
samples the held-out split, and prints the summary table plus two curve
comparisons: held-out PSNR ordering across base predictors, and the
epsilon-MSE training curves of the residual vs zero-base arms. A separate
pretrain-only arm trains the base CNN with the spatial term alone so the
full loss can be compared against it on validation SSIM.

Everything is CPU-sized: with the defaults this takes tens of minutes on
one core. Results land under --out; rerunning with the same seed and
settings reproduces them bit for bit.
"""

import argparse
import csv
import time
from pathlib import Path

from resdiffusion.ablation import apply_toggles, run_ablation
from resdiffusion.config import (AblationSection, DataConfig, DiffusionSection,
                                 PretrainSection, RunConfig, RunSection, SampleSection,
                                 SrSection, TrainSection)
from resdiffusion.data import write_split
from resdiffusion.losses import LossWeights
from resdiffusion.synthetic import make_corpus
from resdiffusion.train import pretrain_cnn
from resdiffusion.unet import UNetConfig

DEFAULT_VARIANTS = "cnn=none;cnn=bilinear;cnn=simplesr"


def build_config(out: Path, data_root: Path, splits_dir: Path, *, seed: int,
                 steps: int, pretrain_steps: int, pretrain_lr: float, timesteps: int,
                 base_channels: int, sr_channels: int, sr_blocks: int,
                 eval_images: int, variants: str) -> RunConfig:
    return RunConfig(
        run=RunSection(seed=seed, out=str(out)),
        data=DataConfig(root=str(data_root),
                        train_split=str(splits_dir / "train.txt"),
                        val_split=str(splits_dir / "val.txt"),
                        test_split=str(splits_dir / "test.txt"),
                        scale=4, hr_patch=64),
        sr=SrSection(channels=sr_channels, blocks=sr_blocks),
        loss=LossWeights(),
        unet=UNetConfig(depth=2, base_channels=base_channels),
        diffusion=DiffusionSection(timesteps=timesteps, beta_start=1e-4,
                                   beta_end=0.02, gain=0.25),
        pretrain=PretrainSection(steps=pretrain_steps, batch_size=8, lr=pretrain_lr,
                                 log_every=25, val_every=max(pretrain_steps // 4, 1),
                                 val_limit=16),
        train=TrainSection(steps=steps, batch_size=4, lr=2e-4, log_every=50),
        sample=SampleSection(n_variants=1, batch_size=8, limit=eval_images),
        ablation=AblationSection(variants=variants),
    )


def make_data(out: Path, images: int, seed: int) -> tuple[Path, Path]:
    data_root = out / "data" / "images"
    splits_dir = out / "data" / "splits"
    names = make_corpus(data_root, images, size=64, seed=seed)
    n_val = max(images // 50, 2)
    n_test = max(images // 32, 4)
    write_split(names[: images - n_val - n_test], splits_dir / "train.txt")
    write_split(names[images - n_val - n_test : images - n_test], splits_dir / "val.txt")
    write_split(names[images - n_test :], splits_dir / "test.txt")
    return data_root, splits_dir


def run_experiment(out: str | Path, *, seed: int = 0, images: int = 800,
                   steps: int = 2600, pretrain_steps: int = 1200,
                   pretrain_lr: float = 5e-4, timesteps: int = 200,
                   base_channels: int = 24, sr_channels: int = 48, sr_blocks: int = 6,
                   eval_images: int = 24, variants: str = DEFAULT_VARIANTS,
                   progress=None) -> list[dict]:
    """Corpus + ablation matrix + the pretrain-loss arm; returns the table rows."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data_root, splits_dir = make_data(out, images, seed)
    if progress:
        progress("corpus ready")
    cfg = build_config(out, data_root, splits_dir, seed=seed, steps=steps,
                       pretrain_steps=pretrain_steps, pretrain_lr=pretrain_lr,
                       timesteps=timesteps, base_channels=base_channels,
                       sr_channels=sr_channels, sr_blocks=sr_blocks,
                       eval_images=eval_images, variants=variants)
    rows = run_ablation(cfg, out, progress=progress)

    # Pretrain-only arm: spatial-term-only base CNN for the loss comparison.
    gt_dir = out / "pretrained" / "simplesr_gt_only"
    if not (gt_dir / "checkpoint").is_dir():
        if progress:
            progress("[pretrain] simplesr with spatial loss only")
        pretrain_cnn(apply_toggles(cfg, {"cnn": "simplesr", "cnn_loss": "gt_only"}), gt_dir)
    return rows


def read_curve(path: Path) -> list[tuple[int, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    key = "eps_mse" if "eps_mse" in rows[0] else "L_CNN"
    return [(int(r["step"]), float(r[key])) for r in rows]


def curve_win_fraction(out: Path, residual_variant: str, control_variant: str,
                       after_step: int) -> tuple[int, int]:
    """(checkpoints where residual loss <= control, shared checkpoints) after a step."""
    res = dict(read_curve(out / "variants" / residual_variant / "loss.csv"))
    ctl = dict(read_curve(out / "variants" / control_variant / "loss.csv"))
    steps = sorted(s for s in res if s in ctl and s > after_step)
    wins = sum(1 for s in steps if res[s] <= ctl[s])
    return wins, len(steps)


def read_val_ssim(val_csv: Path) -> dict[int, float]:
    with open(val_csv, newline="") as fh:
        return {int(r["step"]): float(r["ssim_luma"]) for r in csv.DictReader(fh)}


def pretrain_val_ssim(out: Path) -> tuple[int, float, float]:
    """(last shared step, full-loss SSIM, spatial-only SSIM) of the pretrain arms."""
    full = read_val_ssim(out / "pretrained" / "simplesr_full" / "val.csv")
    gt = read_val_ssim(out / "pretrained" / "simplesr_gt_only" / "val.csv")
    shared = sorted(set(full) & set(gt))
    last = shared[-1]
    return last, full[last], gt[last]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/desk"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--images", type=int, default=800)
    ap.add_argument("--steps", type=int, default=2600)
    ap.add_argument("--pretrain-steps", type=int, default=1200)
    ap.add_argument("--pretrain-lr", type=float, default=5e-4)
    ap.add_argument("--timesteps", type=int, default=200)
    ap.add_argument("--base-channels", type=int, default=24)
    ap.add_argument("--sr-channels", type=int, default=48)
    ap.add_argument("--sr-blocks", type=int, default=6)
    ap.add_argument("--eval-images", type=int, default=24)
    ap.add_argument("--variants", default=DEFAULT_VARIANTS)
    args = ap.parse_args()

    t0 = time.time()
    rows = run_experiment(args.out, seed=args.seed, images=args.images, steps=args.steps,
                          pretrain_steps=args.pretrain_steps, pretrain_lr=args.pretrain_lr,
                          timesteps=args.timesteps, base_channels=args.base_channels,
                          sr_channels=args.sr_channels, sr_blocks=args.sr_blocks,
                          eval_images=args.eval_images, variants=args.variants,
                          progress=lambda msg: print(f"{msg} (t={time.time() - t0:.0f}s)",
                                                     flush=True))

    print(f"\nablation table ({time.time() - t0:.0f}s total):")
    for row in rows:
        print(f"  {row['variant']:<28} PSNR {row['psnr_rgb']:.3f}  SSIM {row['ssim_luma']:.4f}")

    by_cnn = {row["cnn"]: row for row in rows if row["cnn_loss"] == "full"}
    if "simplesr" in by_cnn and "none" in by_cnn:
        gap = by_cnn["simplesr"]["psnr_rgb"] - by_cnn["none"]["psnr_rgb"]
        print(f"\nfull - zero-base PSNR gap: {gap:+.3f} dB (want >= +0.3)")
        wins, total = curve_win_fraction(args.out, "cnn-simplesr", "cnn-none",
                                         after_step=2000)
        if total:
            print(f"curves: residual <= control at {wins}/{total} checkpoints "
                  f"after step 2000 ({100.0 * wins / total:.0f}%)")
    if "simplesr" in by_cnn and "bilinear" in by_cnn:
        print(f"simplesr - bilinear PSNR gap: "
              f"{by_cnn['simplesr']['psnr_rgb'] - by_cnn['bilinear']['psnr_rgb']:+.3f} dB")

    step, full_ssim, gt_ssim = pretrain_val_ssim(args.out)
    print(f"pretrain val SSIM at step {step}: full {full_ssim:.4f} vs "
          f"spatial-only {gt_ssim:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

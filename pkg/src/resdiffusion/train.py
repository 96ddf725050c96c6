"""Training loops for the base CNN and the residual diffusion model.

Determinism contract: the RNG stream of step s is derived from
(run seed, step index), never from a shared cursor. Resuming from a
checkpoint therefore continues the exact trajectory of an uninterrupted
run, and two runs with the same config and seed produce identical loss
curves.
"""

import csv
from pathlib import Path

import torch

from .checkpoint import (Checkpoint, load_checkpoint, pack_adam_state, save_checkpoint,
                         unpack_adam_state)
from .config import RunConfig, write_config
from .data import PatchDataset, read_split, to_unit
from .denoiser import ResidualDenoiser, denoiser_from_manifest
from .diffusion import DiffusionSchedule, make_schedule, q_sample
from .errors import ConfigError, NumericError
from .losses import LossWeights, loss_dwt, loss_fft, loss_gt
from .metrics import psnr, ssim
from .predictors import (build_predictor, freeze, is_trainable,
                         prepare_conditioning)
from .seeding import STREAM_INIT, STREAM_TRAIN_STEP, generator_for, seed_for
from .simplesr import SimpleSR, SimpleSRConfig


def dataset_for(cfg: RunConfig, split_path: str) -> PatchDataset:
    files = read_split(split_path)
    return PatchDataset(cfg.data.root, files, cfg.data.hr_patch, cfg.data.scale)


def build_cnn(cfg: RunConfig) -> torch.nn.Module:
    kind = cfg.ablation.cnn
    if kind == "simplesr":
        return SimpleSR(SimpleSRConfig(scale=cfg.data.scale, channels=cfg.sr.channels,
                                       blocks=cfg.sr.blocks))
    return build_predictor(kind, cfg.data.scale)


def _csv_writer(path: Path, header: list[str], append: bool):
    exists = path.exists()
    fh = open(path, "a" if append and exists else "w", newline="")
    writer = csv.writer(fh)
    if not (append and exists):
        writer.writerow(header)
    return fh, writer


def validate_metrics(model: torch.nn.Module, dataset: PatchDataset,
                     limit: int) -> tuple[float, float]:
    """Mean PSNR (RGB, [0,1]) and SSIM (luma) over deterministic center crops."""
    model.eval()
    with torch.no_grad():
        lr_b, hr_b, _ = dataset.eval_pairs(limit or None)
        sr = model(lr_b)
    psnrs, ssims = [], []
    for i in range(sr.shape[0]):
        a, b = to_unit(sr[i]), to_unit(hr_b[i])
        psnrs.append(psnr(a, b, 1.0))
        ssims.append(ssim(a, b, 1.0))
    return float(sum(psnrs) / len(psnrs)), float(sum(ssims) / len(ssims))


def pretrain_cnn(cfg: RunConfig, out_dir: str | Path, resume: str | None = None) -> Path:
    """Train the base CNN; writes loss.csv, val.csv, and checkpoint/."""
    kind = cfg.ablation.cnn
    if not is_trainable(kind):
        raise ConfigError(f"ablation.cnn = {kind!r} has no trainable parameters to pretrain")
    if cfg.data.hr_patch % 2**cfg.loss.dwt_levels:
        raise ConfigError(
            f"data.hr_patch = {cfg.data.hr_patch} is not divisible by "
            f"2**loss.dwt_levels = {2**cfg.loss.dwt_levels}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out_dir / "resolved.cfg")
    train_ds = dataset_for(cfg, cfg.data.train_split)
    val_ds = dataset_for(cfg, cfg.data.val_split)

    gt_only = cfg.ablation.cnn_loss == "gt_only"
    alpha = 0.0 if gt_only else cfg.loss.alpha
    beta = 0.0 if gt_only else cfg.loss.beta
    weights = LossWeights(alpha=alpha, beta=beta, dwt_levels=cfg.loss.dwt_levels)

    torch.manual_seed(seed_for(cfg.run.seed, STREAM_INIT, 0))
    model = build_cnn(cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.pretrain.lr)

    start = 0
    if resume is not None:
        ckpt = load_checkpoint(resume)
        ckpt.require_kind(kind)
        ckpt.load_into(model)
        if ckpt.optimizer is not None:
            unpack_adam_state(opt, ckpt.optimizer)
        start = ckpt.step()

    steps = cfg.pretrain.steps
    loss_fh, loss_csv = _csv_writer(out_dir / "loss.csv",
                                    ["step", "L_GT", "L_FFT", "L_DWT", "L_CNN"],
                                    append=resume is not None)
    val_fh, val_csv = _csv_writer(out_dir / "val.csv",
                                  ["step", "psnr_rgb", "ssim_luma"],
                                  append=resume is not None)
    try:
        for step in range(start + 1, steps + 1):
            gen = generator_for(cfg.run.seed, STREAM_TRAIN_STEP, step)
            lr_b, hr_b = train_ds.batch(cfg.pretrain.batch_size, gen)
            model.train()
            pred = model(lr_b)
            l_gt = loss_gt(pred, hr_b)
            l_fft = loss_fft(pred, hr_b)
            l_dwt = loss_dwt(pred, hr_b, weights.dwt_levels)
            total = l_gt + weights.alpha * l_fft + weights.beta * l_dwt
            if not torch.isfinite(total):
                raise NumericError(
                    f"pretraining loss is not finite at step {step}: "
                    f"L_GT={l_gt.item():.6g} L_FFT={l_fft.item():.6g} L_DWT={l_dwt.item():.6g}"
                )
            opt.zero_grad()
            total.backward()
            opt.step()
            if step == 1 or step == steps or step % cfg.pretrain.log_every == 0:
                loss_csv.writerow([step, f"{l_gt.item():.8g}", f"{l_fft.item():.8g}",
                                   f"{l_dwt.item():.8g}", f"{total.item():.8g}"])
            if step == steps or (cfg.pretrain.val_every and step % cfg.pretrain.val_every == 0):
                vp, vs = validate_metrics(model, val_ds, cfg.pretrain.val_limit)
                val_csv.writerow([step, f"{vp:.6f}", f"{vs:.6f}"])
                loss_fh.flush()
                val_fh.flush()
    finally:
        loss_fh.close()
        val_fh.close()

    ckpt_dir = out_dir / "checkpoint"
    manifest = {
        "kind": kind,
        "step": str(steps),
        "seed": str(cfg.run.seed),
        "scale": str(cfg.data.scale),
        "channels": str(cfg.sr.channels),
        "blocks": str(cfg.sr.blocks),
        "cnn_loss": cfg.ablation.cnn_loss,
        "loss.alpha": str(weights.alpha),
        "loss.beta": str(weights.beta),
    }
    save_checkpoint(ckpt_dir, model.state_dict(), manifest, pack_adam_state(opt))
    return ckpt_dir


def cnn_checkpoint_mismatches(ckpt: Checkpoint, cfg: RunConfig) -> list[str]:
    """Fields where a base-CNN checkpoint contradicts the run config."""
    mismatched = []
    checks = {
        "kind": cfg.ablation.cnn,
        "scale": str(cfg.data.scale),
    }
    if cfg.ablation.cnn == "simplesr":
        checks["channels"] = str(cfg.sr.channels)
        checks["blocks"] = str(cfg.sr.blocks)
    for key, expected in checks.items():
        found = ckpt.manifest.get(key)
        if found != expected:
            mismatched.append(f"{key} (checkpoint {found!r} vs config {expected!r})")
    return mismatched


def load_frozen_cnn(cfg: RunConfig, cnn_checkpoint: str | Path) -> torch.nn.Module:
    ckpt = load_checkpoint(cnn_checkpoint)
    mismatched = cnn_checkpoint_mismatches(ckpt, cfg)
    if mismatched:
        raise ConfigError(
            "base CNN checkpoint is incompatible with this config: " + "; ".join(mismatched)
        )
    model = build_cnn(cfg)
    ckpt.load_into(model)
    return freeze(model)


def train_diffusion(cfg: RunConfig, out_dir: str | Path,
                    cnn_checkpoint: str | Path | None = None,
                    resume: str | None = None) -> Path:
    """Train the residual denoiser against a frozen base predictor."""
    kind = cfg.ablation.cnn
    if cfg.data.hr_patch % 2**cfg.unet.depth:
        raise ConfigError(
            f"data.hr_patch = {cfg.data.hr_patch} is not divisible by "
            f"2**unet.depth = {2**cfg.unet.depth}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out_dir / "resolved.cfg")
    train_ds = dataset_for(cfg, cfg.data.train_split)

    if is_trainable(kind):
        if cnn_checkpoint is None:
            raise ConfigError(f"ablation.cnn = {kind!r} requires a pretrained --cnn-checkpoint")
        predictor = load_frozen_cnn(cfg, cnn_checkpoint)
    else:
        predictor = freeze(build_predictor(kind, cfg.data.scale))

    torch.manual_seed(seed_for(cfg.run.seed, STREAM_INIT, 1))
    model = ResidualDenoiser(cfg.unet, channels=3,
                             use_splitter=cfg.ablation.splitter == "on",
                             use_hf_ca=cfg.ablation.hf_ca == "on")
    schedule = make_schedule(cfg.diffusion.timesteps, cfg.diffusion.beta_start,
                             cfg.diffusion.beta_end)
    gain = cfg.diffusion.gain
    opt = torch.optim.Adam(model.parameters(), lr=cfg.train.lr)

    start = 0
    if resume is not None:
        ckpt = load_checkpoint(resume)
        ckpt.require_kind("diffusion")
        ckpt.load_into(model)
        if ckpt.optimizer is not None:
            unpack_adam_state(opt, ckpt.optimizer)
        start = ckpt.step()

    steps = cfg.train.steps
    loss_fh, loss_csv = _csv_writer(out_dir / "loss.csv", ["step", "eps_mse"],
                                    append=resume is not None)
    try:
        for step in range(start + 1, steps + 1):
            gen = generator_for(cfg.run.seed, STREAM_TRAIN_STEP, step)
            lr_b, hr_b = train_ds.batch(cfg.train.batch_size, gen)
            base, cond = prepare_conditioning(kind, predictor, lr_b, cfg.data.scale)
            r0 = (hr_b - base) / gain
            t = torch.randint(1, schedule.timesteps + 1, (r0.shape[0],), generator=gen)
            eps = torch.randn(r0.shape, generator=gen)
            r_t = q_sample(r0, t, eps, schedule)
            model.train()
            eps_hat = model(r_t, cond, t)
            loss = torch.mean((eps_hat - eps) ** 2)
            if not torch.isfinite(loss):
                raise NumericError(f"diffusion loss is not finite at step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            if step == 1 or step == steps or step % cfg.train.log_every == 0:
                loss_csv.writerow([step, f"{loss.item():.8g}"])
                loss_fh.flush()
    finally:
        loss_fh.close()

    manifest = {
        "kind": "diffusion",
        "cnn": kind,
        "step": str(steps),
        "seed": str(cfg.run.seed),
        "scale": str(cfg.data.scale),
        "gain": str(gain),
        "timesteps": str(cfg.diffusion.timesteps),
        "beta_start": str(cfg.diffusion.beta_start),
        "beta_end": str(cfg.diffusion.beta_end),
    }
    manifest.update(model.manifest_fields())
    ckpt_dir = out_dir / "checkpoint"
    save_checkpoint(ckpt_dir, model.state_dict(), manifest, pack_adam_state(opt))
    return ckpt_dir


def restore_denoiser(checkpoint_dir: str | Path):
    """(model, schedule, gain, cnn kind) from a diffusion checkpoint."""
    ckpt = load_checkpoint(checkpoint_dir)
    ckpt.require_kind("diffusion")
    model = denoiser_from_manifest(ckpt.manifest)
    ckpt.load_into(model)
    model.eval()
    schedule = make_schedule(int(ckpt.manifest["timesteps"]),
                             float(ckpt.manifest["beta_start"]),
                             float(ckpt.manifest["beta_end"]))
    gain = float(ckpt.manifest["gain"])
    return model, schedule, gain, ckpt.manifest["cnn"], ckpt


def restore_cnn(cnn_kind: str, scale: int, cnn_checkpoint: str | Path | None) -> torch.nn.Module:
    """Base predictor for sampling; trainable kinds need their checkpoint."""
    if not is_trainable(cnn_kind):
        return freeze(build_predictor(cnn_kind, scale))
    if cnn_checkpoint is None:
        raise ConfigError(f"base predictor {cnn_kind!r} needs --cnn-checkpoint")
    ckpt = load_checkpoint(cnn_checkpoint)
    ckpt.require_kind(cnn_kind)
    if cnn_kind == "simplesr":
        model = SimpleSR(SimpleSRConfig(scale=int(ckpt.manifest["scale"]),
                                        channels=int(ckpt.manifest["channels"]),
                                        blocks=int(ckpt.manifest["blocks"])))
    else:
        model = build_predictor(cnn_kind, int(ckpt.manifest["scale"]))
    if int(ckpt.manifest["scale"]) != scale:
        raise ConfigError(
            f"checkpoint scale {ckpt.manifest['scale']} does not match requested scale {scale}"
        )
    ckpt.load_into(model)
    return freeze(model)

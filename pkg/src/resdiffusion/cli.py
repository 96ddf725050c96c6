"""Command-line entry points.

Subcommands: pretrain, train-diffusion, sample, eval, ablate. Every
command is non-interactive, writes its resolved config beside its outputs,
and maps failures to exit codes: 2 for configuration problems, 3 for data
problems, 4 for numeric failures, 1 for anything else.
"""

import argparse
import sys
from pathlib import Path

from .ablation import aggregate_ablation, parse_variants, run_ablation
from .config import RunConfig, parse_config, write_config
from .data import read_split
from .errors import ConfigError, DataError, NumericError
from .evaluation import evaluate_dirs
from .sampling import sample_directory
from .train import pretrain_cnn, restore_cnn, restore_denoiser, train_diffusion


def _add_common(sub: argparse.ArgumentParser, config_required: bool = True) -> None:
    sub.add_argument("--config", required=config_required, help="key-value config file")
    sub.add_argument("--seed", type=int, default=None, help="override run.seed")
    sub.add_argument("--out", default=None, help="override run.out output directory")
    sub.add_argument("--resume", default=None, help="checkpoint directory to resume from")
    sub.add_argument("--dry-run", action="store_true",
                     help="validate the configuration and inputs, then exit")


def _load_config(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.out is not None:
        overrides["run.out"] = args.out
    return parse_config(args.config, overrides)


def _check_data(cfg: RunConfig, splits: tuple[str, ...]) -> None:
    root = Path(cfg.data.root)
    if not root.is_dir():
        raise DataError(f"data.root directory not found: {root}")
    for attr in splits:
        path = getattr(cfg.data, attr)
        files = read_split(path)
        missing = [f for f in files if not (root / f).exists()]
        if missing:
            raise DataError(f"{attr} lists missing files under {root}: {missing[:5]}")


def cmd_pretrain(args) -> int:
    cfg = _load_config(args)
    _check_data(cfg, ("train_split", "val_split"))
    if args.dry_run:
        print("pretrain: config and data OK (dry run)")
        return 0
    out_dir = Path(cfg.run.out)
    ckpt = pretrain_cnn(cfg, out_dir, resume=args.resume)
    print(f"pretrain: checkpoint at {ckpt}")
    return 0


def cmd_train_diffusion(args) -> int:
    cfg = _load_config(args)
    _check_data(cfg, ("train_split",))
    if args.dry_run:
        print("train-diffusion: config and data OK (dry run)")
        return 0
    out_dir = Path(cfg.run.out)
    ckpt = train_diffusion(cfg, out_dir, cnn_checkpoint=args.cnn_checkpoint,
                           resume=args.resume)
    print(f"train-diffusion: checkpoint at {ckpt}")
    return 0


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    model, schedule, gain, kind, _ = restore_denoiser(args.checkpoint)
    predictor = restore_cnn(kind, cfg.data.scale, args.cnn_checkpoint)
    if args.dry_run:
        print("sample: checkpoints OK (dry run)")
        return 0
    out_dir = Path(cfg.run.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out_dir / "resolved.cfg")
    n_variants = args.n_variants if args.n_variants is not None else cfg.sample.n_variants
    rows = sample_directory(model, schedule, gain, kind, predictor, cfg.data.scale,
                            args.input_dir, out_dir, base_seed=cfg.run.seed,
                            n_variants=n_variants, batch_size=cfg.sample.batch_size,
                            limit=args.limit if args.limit is not None else cfg.sample.limit,
                            hr_dir=args.hr_dir)
    print(f"sample: wrote {len(rows)} image(s) under {out_dir / 'samples'}")
    return 0


def cmd_eval(args) -> int:
    out_dir = Path(args.out or "eval_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.ablation_root:
        rows = aggregate_ablation(args.ablation_root, out_dir / "ablation.csv")
        print(f"eval: aggregated {len(rows)} variant(s) into {out_dir / 'ablation.csv'}")
        return 0
    if not args.sample_dir or not args.hr_dir:
        raise ConfigError("eval needs --sample-dir and --hr-dir (or --ablation-root)")
    summary = evaluate_dirs(args.sample_dir, args.hr_dir, out_dir / "eval.csv")
    print(f"eval: {summary['images']} image(s), mean PSNR {summary['psnr_rgb']:.4f} dB, "
          f"mean SSIM {summary['ssim_luma']:.4f} "
          f"({summary['skipped']} unpaired skipped)")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    _check_data(cfg, ("train_split", "val_split", "test_split"))
    variants = parse_variants(cfg.ablation.variants)
    if args.dry_run:
        print(f"ablate: config OK, {len(variants)} variant(s) (dry run)")
        return 0
    rows = run_ablation(cfg, Path(cfg.run.out), progress=print)
    print(f"ablate: wrote {Path(cfg.run.out) / 'ablation.csv'} with {len(rows)} row(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resdiffusion",
        description="Residual diffusion super-resolution: train, sample, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train the base CNN")
    _add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train-diffusion", help="train the residual denoiser")
    _add_common(p)
    p.add_argument("--cnn-checkpoint", default=None,
                   help="pretrained base CNN checkpoint directory")
    p.set_defaults(func=cmd_train_diffusion)

    p = sub.add_parser("sample", help="restore LR inputs with a trained model")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="diffusion checkpoint directory")
    p.add_argument("--cnn-checkpoint", default=None,
                   help="base CNN checkpoint directory (trainable predictors)")
    p.add_argument("--input-dir", required=True, help="directory of LR PNG inputs")
    p.add_argument("--hr-dir", default=None, help="optional HR references for the grid")
    p.add_argument("--n-variants", type=int, default=None,
                   help="samples per input (default: sample.n_variants)")
    p.add_argument("--limit", type=int, default=None, help="max inputs to process")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="score samples against references")
    p.add_argument("--sample-dir", default=None, help="directory of restored PNGs")
    p.add_argument("--hr-dir", default=None, help="directory of reference PNGs")
    p.add_argument("--ablation-root", default=None,
                   help="aggregate an ablation run directory instead")
    p.add_argument("--out", default=None, help="output directory for the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the component-ablation matrix")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

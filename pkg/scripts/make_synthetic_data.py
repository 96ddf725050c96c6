#!/usr/bin/env python3
"""Generate a synthetic PNG corpus plus train/val/test split files.

The images mix smooth gradients, geometric shapes, and band-limited texture,
so both a low-frequency restorer and a high-frequency generator have signal
to learn. Rerunning with the same seed reproduces the corpus bit for bit.

Example:
    python3 scripts/make_synthetic_data.py --root data --images 800 --size 64
then point a config at it:
    data.root = data/images
    data.train_split = data/splits/train.txt
    data.val_split = data/splits/val.txt
    data.test_split = data/splits/test.txt
"""

import argparse
from pathlib import Path

from resdiffusion.data import degrade, load_image, save_image, write_split
from resdiffusion.synthetic import make_corpus


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--root", type=Path, default=Path("data"),
                    help="output directory (images/ and splits/ land inside)")
    ap.add_argument("--images", type=int, default=800)
    ap.add_argument("--size", type=int, default=64, help="square image side in pixels")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--val", type=int, default=None,
                    help="validation images (default: images/50, min 2)")
    ap.add_argument("--test", type=int, default=None,
                    help="test images (default: images/32, min 4)")
    ap.add_argument("--eval-scale", type=int, default=0,
                    help="also write eval_lr/ and eval_hr/ dirs from the test "
                         "split, downscaled by this factor (0 = skip)")
    args = ap.parse_args()

    n_val = args.val if args.val is not None else max(args.images // 50, 2)
    n_test = args.test if args.test is not None else max(args.images // 32, 4)
    n_train = args.images - n_val - n_test
    if n_train <= 0:
        ap.error(f"--images {args.images} leaves no training images after "
                 f"{n_val} val + {n_test} test")

    names = make_corpus(args.root / "images", args.images, size=args.size, seed=args.seed)
    splits = args.root / "splits"
    write_split(names[:n_train], splits / "train.txt")
    write_split(names[n_train : n_train + n_val], splits / "val.txt")
    write_split(names[n_train + n_val :], splits / "test.txt")
    print(f"{args.images} images ({args.size}x{args.size}) under {args.root / 'images'}")
    print(f"splits: {n_train} train / {n_val} val / {n_test} test under {splits}")

    if args.eval_scale:
        lr_dir, hr_dir = args.root / "eval_lr", args.root / "eval_hr"
        for name in names[n_train + n_val :]:
            hr = load_image(args.root / "images" / name)
            save_image(hr, hr_dir / name)
            save_image(degrade(hr, args.eval_scale), lr_dir / name)
        print(f"eval pairs ({args.eval_scale}x): {lr_dir} and {hr_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

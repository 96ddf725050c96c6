"""Paired-directory evaluation and the ablation summary table.

Per-image report CSV: columns (image_id, psnr_rgb, ssim_luma) plus a final
``mean`` row. PSNR is computed over all RGB elements of [0, 1]-rescaled
images; SSIM on ITU-R 601 luma. Sample files pair with references either
by identical filename or by stripping a ``_sNN`` variant suffix.

The ablation table has one row per trained variant; the perceptual-
distribution column is a placeholder marked unavailable since no external
feature network ships with this package.
"""

import csv
import math
import re
import sys
from pathlib import Path

from .data import load_image, to_unit
from .errors import DataError
from .metrics import psnr, ssim

_VARIANT_SUFFIX = re.compile(r"_s\d+$")

ABLATION_COLUMNS = ["variant", "cnn", "splitter", "hf_ca", "cnn_loss",
                    "psnr_rgb", "ssim_luma", "fid"]


def reference_stem(sample_stem: str) -> str:
    return _VARIANT_SUFFIX.sub("", sample_stem)


def pair_files(sample_dir: str | Path, hr_dir: str | Path):
    """(sample path, reference path) pairs plus the unpaired sample names."""
    sample_dir, hr_dir = Path(sample_dir), Path(hr_dir)
    if not sample_dir.is_dir():
        raise DataError(f"sample directory not found: {sample_dir}")
    if not hr_dir.is_dir():
        raise DataError(f"reference directory not found: {hr_dir}")
    refs = {p.stem: p for p in sorted(hr_dir.glob("*.png"))}
    pairs, unpaired = [], []
    for sample in sorted(sample_dir.glob("*.png")):
        ref = refs.get(sample.stem) or refs.get(reference_stem(sample.stem))
        if ref is None:
            unpaired.append(sample.name)
        else:
            pairs.append((sample, ref))
    return pairs, unpaired


def score_pair(sample_path: Path, ref_path: Path) -> tuple[float, float]:
    a = to_unit(load_image(sample_path))
    b = to_unit(load_image(ref_path))
    if a.shape != b.shape:
        raise DataError(
            f"{sample_path.name} is {tuple(a.shape)} but {ref_path.name} is {tuple(b.shape)}"
        )
    return psnr(a, b, 1.0), ssim(a, b, 1.0)


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def evaluate_dirs(sample_dir: str | Path, hr_dir: str | Path,
                  out_csv: str | Path) -> dict:
    """Score every paired PNG; returns the summary means.

    Unpaired files are skipped with a warning on stderr, mirroring the
    CSV's role as the authoritative record.
    """
    pairs, unpaired = pair_files(sample_dir, hr_dir)
    if unpaired:
        print(f"warning: skipped {len(unpaired)} unpaired sample file(s): "
              + ", ".join(unpaired[:5]), file=sys.stderr)
    if not pairs:
        raise DataError(f"no paired images between {sample_dir} and {hr_dir}")
    rows = []
    for sample, ref in pairs:
        p, s = score_pair(sample, ref)
        rows.append((sample.stem, p, s))
    mean_psnr = sum(r[1] for r in rows) / len(rows)
    mean_ssim = sum(r[2] for r in rows) / len(rows)
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "psnr_rgb", "ssim_luma"])
        for stem, p, s in rows:
            writer.writerow([stem, _fmt(p), _fmt(s)])
        writer.writerow(["mean", _fmt(mean_psnr), _fmt(mean_ssim)])
    return {"psnr_rgb": mean_psnr, "ssim_luma": mean_ssim,
            "images": len(rows), "skipped": len(unpaired)}


def read_eval_summary(eval_csv: str | Path) -> dict:
    """The mean row of a per-image report."""
    with open(eval_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["image_id"] == "mean":
                return {"psnr_rgb": float(row["psnr_rgb"]),
                        "ssim_luma": float(row["ssim_luma"])}
    raise DataError(f"no mean row in {eval_csv}")


def write_ablation_csv(rows: list[dict], path: str | Path) -> None:
    """One row per variant run; unknown metric -> 'unavailable'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ABLATION_COLUMNS)
        writer.writeheader()
        for row in rows:
            record = {col: row.get(col, "unavailable") for col in ABLATION_COLUMNS}
            if isinstance(record["psnr_rgb"], float):
                record["psnr_rgb"] = _fmt(record["psnr_rgb"])
            if isinstance(record["ssim_luma"], float):
                record["ssim_luma"] = _fmt(record["ssim_luma"])
            writer.writerow(record)


def read_ablation_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

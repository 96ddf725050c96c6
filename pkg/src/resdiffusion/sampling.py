"""Directory-level sampling: LR PNGs in, restored PNGs + grid + manifest out.

Each (image, variant) pair gets its own named seed derived from
(base seed, variant, image index); the manifest records every seed, so any
single output can be regenerated bit-exactly without rerunning the rest.
"""

import csv
from pathlib import Path

import torch

from .data import load_image, save_image, upsample
from .diffusion import DiffusionSchedule, image_seeds_for, sample
from .errors import DataError
from .predictors import prepare_conditioning


def list_inputs(input_dir: str | Path, limit: int = 0) -> list[Path]:
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise DataError(f"input directory not found: {input_dir}")
    files = sorted(input_dir.glob("*.png"))
    if not files:
        raise DataError(f"no PNG inputs in {input_dir}")
    return files[:limit] if limit else files


def _batches(items: list, size: int):
    for i in range(0, len(items), size):
        yield i, items[i : i + size]


def sample_directory(model, schedule: DiffusionSchedule, gain: float, kind: str,
                     predictor, scale: int, input_dir: str | Path, out_dir: str | Path,
                     *, base_seed: int, n_variants: int = 1, batch_size: int = 8,
                     limit: int = 0, hr_dir: str | Path | None = None,
                     grid_rows: int = 6) -> list[dict]:
    """Sample every LR input n_variants times; returns the manifest rows."""
    out_dir = Path(out_dir)
    samples_dir = out_dir / "samples"
    samples_dir.mkdir(parents=True, exist_ok=True)
    files = list_inputs(input_dir, limit)

    manifest_rows: list[dict] = []
    grid_cells: dict[str, list[torch.Tensor]] = {}
    for offset, chunk in _batches(files, batch_size):
        x_lr = torch.stack([load_image(p) for p in chunk])
        base, cond = prepare_conditioning(kind, predictor, x_lr, scale)
        for i, path in enumerate(chunk):
            if len(grid_cells) < grid_rows:
                grid_cells[path.stem] = [upsample(x_lr[i], scale, "bicubic"), cond[i]]
        for variant in range(n_variants):
            indices = list(range(offset, offset + len(chunk)))
            seeds = image_seeds_for(base_seed, indices, variant)
            out = sample(x_lr, base, cond, model, schedule, seeds, gain=gain)
            for i, path in enumerate(chunk):
                name = f"{path.stem}_s{variant:02d}.png"
                save_image(out[i], samples_dir / name)
                manifest_rows.append({
                    "input": path.name,
                    "variant": variant,
                    "seed": seeds[i],
                    "output": name,
                })
                if path.stem in grid_cells:
                    grid_cells[path.stem].append(out[i])

    if hr_dir is not None:
        hr_dir = Path(hr_dir)
        for stem, cells in grid_cells.items():
            hr_path = hr_dir / f"{stem}.png"
            if hr_path.exists():
                cells.append(load_image(hr_path))

    with open(out_dir / "samples_manifest.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["input", "variant", "seed", "output"])
        writer.writeheader()
        writer.writerows(manifest_rows)
    with open(out_dir / "seed.txt", "w") as fh:
        fh.write(f"base_seed = {base_seed}\n")

    if grid_cells:
        save_image(_assemble_grid(list(grid_cells.values())), out_dir / "grid.png")
    return manifest_rows


def _assemble_grid(rows: list[list[torch.Tensor]], pad: int = 2) -> torch.Tensor:
    """Row per input, column per panel, white separators."""
    width = max(len(r) for r in rows)
    c, h, w = rows[0][0].shape
    grid_h = len(rows) * h + (len(rows) - 1) * pad
    grid_w = width * w + (width - 1) * pad
    canvas = torch.ones(c, grid_h, grid_w)
    for r, row in enumerate(rows):
        for col, cell in enumerate(row):
            top = r * (h + pad)
            left = col * (w + pad)
            canvas[:, top : top + h, left : left + w] = cell
    return canvas

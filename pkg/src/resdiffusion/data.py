"""Dataset ingestion: PNG I/O, bicubic degradation, patch extraction, and
split manifests.

Images live in memory as float32 tensors shaped (C, H, W) with values in
[-1, 1] (8-bit files map via x/127.5 - 1). Low-resolution inputs are always
derived from the high-resolution patch by deterministic bicubic
downsampling, so (lr, hr) pairs satisfy ``lr_size * scale == hr_size`` by
construction.
"""

import os
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import DataError


def load_image(path: str | os.PathLike) -> torch.Tensor:
    """Read an 8-bit PNG (or any PIL-readable file) into a [-1, 1] tensor."""
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32)
    except FileNotFoundError:
        raise DataError(f"image not found: {path}") from None
    tensor = torch.from_numpy(arr).permute(2, 0, 1)
    return tensor / 127.5 - 1.0


def save_image(image: torch.Tensor, path: str | os.PathLike) -> None:
    """Write a [-1, 1] (C, H, W) tensor as an 8-bit PNG."""
    arr = image.detach().clamp(-1.0, 1.0).add(1.0).mul(127.5).round().to(torch.uint8)
    arr = arr.permute(1, 2, 0).cpu().numpy()
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def to_unit(image: torch.Tensor) -> torch.Tensor:
    """Map [-1, 1] to [0, 1], clamped; metrics operate in this range."""
    return ((image + 1.0) / 2.0).clamp(0.0, 1.0)


def degrade(hr: torch.Tensor, scale: int) -> torch.Tensor:
    """Bicubic downsampling by an integer factor (antialiased, deterministic)."""
    h, w = hr.shape[-2], hr.shape[-1]
    if h % scale or w % scale:
        raise ValueError(f"spatial dimensions must be divisible by scale={scale}; got {h}x{w}")
    batched = hr.ndim == 4
    x = hr if batched else hr.unsqueeze(0)
    out = F.interpolate(x, size=(h // scale, w // scale), mode="bicubic", antialias=True, align_corners=False)
    return out if batched else out.squeeze(0)


def upsample(lr: torch.Tensor, scale: int, mode: str = "bicubic") -> torch.Tensor:
    """Interpolation upsampling; the bicubic variant is the neutral baseline."""
    batched = lr.ndim == 4
    x = lr if batched else lr.unsqueeze(0)
    out = F.interpolate(x, scale_factor=scale, mode=mode, align_corners=False)
    return out if batched else out.squeeze(0)


def read_split(path: str | os.PathLike) -> list[str]:
    """Plain-text split manifest: one relative filename per line."""
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise DataError(f"split manifest not found: {path}") from None
    files = [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]
    if not files:
        raise DataError(f"split manifest is empty: {path}")
    return files


def write_split(files: list[str], path: str | os.PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(files) + "\n")


def check_disjoint(*splits: list[str]) -> None:
    seen: set[str] = set()
    for split in splits:
        overlap = seen.intersection(split)
        if overlap:
            raise DataError(f"split manifests overlap: {sorted(overlap)[:5]}")
        seen.update(split)


class PatchDataset:
    """HR patches from a directory of images, with on-the-fly LR degradation.

    ``batch`` draws random crops through an explicit torch.Generator so
    iteration order is reproducible from a seed; ``eval_pairs`` uses
    deterministic center crops.
    """

    def __init__(self, root: str | os.PathLike, files: list[str], hr_patch: int, scale: int):
        if hr_patch % scale:
            raise ValueError(f"hr_patch={hr_patch} must be divisible by scale={scale}")
        self.root = Path(root)
        self.files = list(files)
        self.hr_patch = hr_patch
        self.scale = scale
        if not self.files:
            raise DataError("dataset has no files")
        missing = [f for f in self.files if not (self.root / f).exists()]
        if missing:
            raise DataError(f"missing image files under {self.root}: {missing[:5]}")
        self._cache: dict[str, torch.Tensor] = {}

    def __len__(self) -> int:
        return len(self.files)

    def _image(self, name: str) -> torch.Tensor:
        if name not in self._cache:
            img = load_image(self.root / name)
            if img.shape[-2] < self.hr_patch or img.shape[-1] < self.hr_patch:
                raise DataError(
                    f"{name} is {img.shape[-2]}x{img.shape[-1]}, smaller than hr_patch={self.hr_patch}"
                )
            self._cache[name] = img
        return self._cache[name]

    def _crop(self, img: torch.Tensor, top: int, left: int) -> torch.Tensor:
        return img[:, top : top + self.hr_patch, left : left + self.hr_patch]

    def batch(self, batch_size: int, generator: torch.Generator) -> tuple[torch.Tensor, torch.Tensor]:
        """Random (lr, hr) batch: random file choice and random crop offsets."""
        idx = torch.randint(len(self.files), (batch_size,), generator=generator)
        hrs = []
        for i in idx.tolist():
            img = self._image(self.files[i])
            max_top = img.shape[-2] - self.hr_patch
            max_left = img.shape[-1] - self.hr_patch
            top = int(torch.randint(max_top + 1, (1,), generator=generator))
            left = int(torch.randint(max_left + 1, (1,), generator=generator))
            hrs.append(self._crop(img, top, left))
        hr = torch.stack(hrs)
        return degrade(hr, self.scale), hr

    def eval_pairs(self, limit: int | None = None) -> tuple[torch.Tensor, torch.Tensor, list[str]]:
        """Deterministic center-crop pairs for evaluation."""
        names = self.files[:limit] if limit else self.files
        hrs = []
        for name in names:
            img = self._image(name)
            top = (img.shape[-2] - self.hr_patch) // 2
            left = (img.shape[-1] - self.hr_patch) // 2
            hrs.append(self._crop(img, top, left))
        hr = torch.stack(hrs)
        return degrade(hr, self.scale), hr, list(names)

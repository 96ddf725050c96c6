"""Checkpoint serialization.

A checkpoint is a directory holding a human-readable ``manifest.txt`` of
``key = value`` pairs plus one or more binary tensor blobs:

  weights.bin     model parameters and buffers
  optimizer.bin   optional optimizer state (moment tensors, step counters)

Blob layout (all integers little-endian):

  magic     8 bytes  b"WBLOB001"
  count     uint32   number of tensors
  per tensor:
    name_len  uint16
    name      UTF-8 bytes
    ndim      uint8
    dims      uint32 * ndim
    data      float32 * prod(dims), row-major

Tensors are stored as float32, which is the native precision of every
trainable tensor here, so save/load round-trips are bit-exact and training
can resume deterministically.
"""

import hashlib
import os
import struct
from pathlib import Path

import torch

from .errors import ConfigError, DataError

MAGIC = b"WBLOB001"


def write_blob(tensors: dict[str, torch.Tensor], path: str | os.PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors.items():
            data = tensor.detach().to(torch.float32).contiguous().cpu()
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(data.numpy().tobytes())


def read_blob(path: str | os.PathLike) -> dict[str, torch.Tensor]:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"tensor blob not found: {path}") from None
    if raw[:8] != MAGIC:
        raise DataError(f"bad magic in {path}: {raw[:8]!r}")
    offset = 8
    (count,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    tensors: dict[str, torch.Tensor] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        dims = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        numel = 1
        for dim in dims:
            numel *= dim
        tensor = torch.frombuffer(bytearray(raw[offset : offset + 4 * numel]), dtype=torch.float32)
        offset += 4 * numel
        tensors[name] = tensor.reshape(dims).clone()
    if offset != len(raw):
        raise DataError(f"trailing bytes in {path}: {len(raw) - offset}")
    return tensors


def arch_hash(state: dict[str, torch.Tensor]) -> str:
    """Fingerprint of tensor names and shapes; detects architecture drift."""
    digest = hashlib.sha256()
    for name in sorted(state):
        digest.update(f"{name}:{tuple(state[name].shape)}\n".encode())
    return digest.hexdigest()[:16]


def write_manifest(items: dict[str, str], path: str | os.PathLike) -> None:
    lines = [f"{key} = {value}" for key, value in items.items()]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}") from None
    items: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        items[key.strip()] = value.strip()
    return items


def save_checkpoint(
    dirpath: str | os.PathLike,
    model_state: dict[str, torch.Tensor],
    manifest: dict[str, str],
    optimizer_state: dict[str, torch.Tensor] | None = None,
) -> None:
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    manifest = dict(manifest)
    manifest["arch_hash"] = arch_hash(model_state)
    manifest["has_optimizer"] = "1" if optimizer_state else "0"
    write_blob(model_state, dirpath / "weights.bin")
    if optimizer_state:
        write_blob(optimizer_state, dirpath / "optimizer.bin")
    write_manifest(manifest, dirpath / "manifest.txt")


class Checkpoint:
    def __init__(self, manifest: dict[str, str], weights: dict[str, torch.Tensor],
                 optimizer: dict[str, torch.Tensor] | None):
        self.manifest = manifest
        self.weights = weights
        self.optimizer = optimizer

    def require_kind(self, kind: str) -> None:
        found = self.manifest.get("kind")
        if found != kind:
            raise ConfigError(f"checkpoint kind is {found!r}, expected {kind!r}")

    def load_into(self, module: torch.nn.Module) -> None:
        """Strict load; the arch hash gives a readable mismatch diagnosis first."""
        expected = arch_hash({k: v for k, v in module.state_dict().items()})
        stored = self.manifest.get("arch_hash", "")
        if stored != expected:
            raise ConfigError(
                f"checkpoint architecture hash {stored} does not match model {expected}; "
                "the checkpoint was produced by a differently configured model"
            )
        module.load_state_dict(self.weights, strict=True)

    def step(self) -> int:
        raw = self.manifest.get("step", "0")
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"checkpoint manifest step {raw!r} is not an integer") from exc


def load_checkpoint(dirpath: str | os.PathLike) -> Checkpoint:
    dirpath = Path(dirpath)
    if not dirpath.is_dir():
        raise DataError(f"checkpoint directory not found: {dirpath}")
    manifest = read_manifest(dirpath / "manifest.txt")
    weights = read_blob(dirpath / "weights.bin")
    stored = manifest.get("arch_hash")
    actual = arch_hash(weights)
    if stored is not None and stored != actual:
        raise DataError(f"weights.bin does not match manifest arch_hash ({actual} vs {stored})")
    optimizer = None
    if manifest.get("has_optimizer") == "1":
        optimizer = read_blob(dirpath / "optimizer.bin")
    return Checkpoint(manifest, weights, optimizer)


def pack_adam_state(optimizer: torch.optim.Adam) -> dict[str, torch.Tensor]:
    """Flatten Adam moment tensors into blob naming: p{i}.exp_avg etc."""
    packed: dict[str, torch.Tensor] = {}
    index = 0
    for group in optimizer.param_groups:
        for param in group["params"]:
            state = optimizer.state.get(param)
            if state:
                packed[f"p{index}.step"] = torch.as_tensor(float(state["step"]))
                packed[f"p{index}.exp_avg"] = state["exp_avg"]
                packed[f"p{index}.exp_avg_sq"] = state["exp_avg_sq"]
            index += 1
    return packed


def unpack_adam_state(optimizer: torch.optim.Adam, packed: dict[str, torch.Tensor]) -> None:
    index = 0
    for group in optimizer.param_groups:
        for param in group["params"]:
            key = f"p{index}.step"
            if key in packed:
                optimizer.state[param] = {
                    "step": packed[key].reshape(()).clone(),
                    "exp_avg": packed[f"p{index}.exp_avg"].clone(),
                    "exp_avg_sq": packed[f"p{index}.exp_avg_sq"].clone(),
                }
            index += 1

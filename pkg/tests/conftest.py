"""Shared fixtures: synthetic corpora, a small pretrained base CNN, and the
acceptance-criterion reporting helper.

Heavy fixtures are session-scoped and deterministic, so every test that
consumes them sees identical data without re-paying the setup cost.
"""

import sys
from pathlib import Path
from types import SimpleNamespace

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from resdiffusion.config import (DataConfig, PretrainSection, RunConfig, RunSection,
                                 SampleSection, SrSection, TrainSection)
from resdiffusion.data import write_split
from resdiffusion.synthetic import make_corpus
from resdiffusion.train import pretrain_cnn
from resdiffusion.unet import UNetConfig


def build_corpus(root: Path, count: int, size: int, seed: int,
                 n_val: int, n_test: int) -> SimpleNamespace:
    images = root / "images"
    names = make_corpus(images, count, size=size, seed=seed)
    splits = root / "splits"
    n_train = count - n_val - n_test
    write_split(names[:n_train], splits / "train.txt")
    write_split(names[n_train : n_train + n_val], splits / "val.txt")
    write_split(names[n_train + n_val :], splits / "test.txt")
    return SimpleNamespace(
        images=images,
        train_split=splits / "train.txt",
        val_split=splits / "val.txt",
        test_split=splits / "test.txt",
        names=names,
    )


def corpus_data_section(corpus: SimpleNamespace, *, scale: int = 4,
                        hr_patch: int = 32) -> DataConfig:
    return DataConfig(root=str(corpus.images),
                      train_split=str(corpus.train_split),
                      val_split=str(corpus.val_split),
                      test_split=str(corpus.test_split),
                      scale=scale, hr_patch=hr_patch)


def tiny_config(corpus: SimpleNamespace, out: Path, *, seed: int = 11,
                hr_patch: int = 32, pretrain_steps: int = 400,
                train_steps: int = 40, timesteps: int = 8) -> RunConfig:
    """A config small enough to train in seconds on one core."""
    from resdiffusion.config import DiffusionSection

    return RunConfig(
        run=RunSection(seed=seed, out=str(out)),
        data=corpus_data_section(corpus, hr_patch=hr_patch),
        sr=SrSection(channels=16, blocks=2),
        unet=UNetConfig(depth=2, base_channels=16),
        diffusion=DiffusionSection(timesteps=timesteps, beta_start=1e-4,
                                   beta_end=0.05, gain=2.0),
        pretrain=PretrainSection(steps=pretrain_steps, batch_size=16, lr=1e-3,
                                 log_every=100, val_every=0, val_limit=4),
        train=TrainSection(steps=train_steps, batch_size=2, lr=2e-4, log_every=10),
        sample=SampleSection(n_variants=1, batch_size=4, limit=0),
    )


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """100 synthetic 96x96 images with an 88/6/6 train/val/test split.

    Large enough that a briefly trained CNN generalizes instead of
    memorizing the train images.
    """
    return build_corpus(tmp_path_factory.mktemp("corpus"), 100, 96, seed=7,
                        n_val=6, n_test=6)


@pytest.fixture(scope="session")
def tiny_cnn(corpus, tmp_path_factory):
    """A briefly pretrained small SimpleSR plus the config that built it."""
    out = tmp_path_factory.mktemp("tiny_cnn")
    cfg = tiny_config(corpus, out)
    checkpoint = pretrain_cnn(cfg, out)
    return SimpleNamespace(checkpoint=checkpoint, config=cfg, out=out)


# ------------------------------------------------- acceptance reporting

ACCEPTANCE_RECORDS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok, detail: str = "") -> None:
    """Print one PASS/FAIL line per acceptance criterion and assert it."""
    ok = bool(ok)
    ACCEPTANCE_RECORDS.append((name, ok, detail))
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
    print(line, flush=True)
    assert ok, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RECORDS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RECORDS:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
        terminalreporter.write_line(line)

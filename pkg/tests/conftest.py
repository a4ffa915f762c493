"""Shared fixtures: synthetic IDX files, toy datasets, MNIST discovery."""

from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest

from isrukit.nn.mnist import Dataset

REPO_ROOT = Path(__file__).resolve().parent.parent


def write_idx_images(path, images: np.ndarray, compress: bool = False) -> None:
    """Serialize a (N, H, W) uint8 array in IDX rank-3 format."""
    n, h, w = images.shape
    blob = struct.pack(">IIII", 0x00000803, n, h, w) + images.astype(np.uint8).tobytes()
    if compress:
        blob = gzip.compress(blob, compresslevel=1)
    Path(path).write_bytes(blob)


def write_idx_labels(path, labels: np.ndarray, compress: bool = False) -> None:
    """Serialize a (N,) uint8 array in IDX rank-1 format."""
    blob = struct.pack(">II", 0x00000801, labels.shape[0]) + labels.astype(np.uint8).tobytes()
    if compress:
        blob = gzip.compress(blob, compresslevel=1)
    Path(path).write_bytes(blob)


def write_mnist_style_dir(root, n_train: int, n_test: int, seed: int = 0) -> Path:
    """A directory with the four canonical MNIST filenames holding random
    (but learnable-labelled) content; see quadrant_dataset."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for prefix, n, s in (("train", n_train, seed), ("t10k", n_test, seed + 1)):
        ds = quadrant_dataset(n, seed=s, classes=10)
        imgs = (ds.images[:, :, :, 0] * 255).astype(np.uint8)
        write_idx_images(root / f"{prefix}-images-idx3-ubyte", imgs)
        write_idx_labels(root / f"{prefix}-labels-idx1-ubyte", ds.labels.astype(np.uint8))
    return root


def quadrant_dataset(n: int, seed: int = 0, classes: int = 4) -> Dataset:
    """Deterministic learnable toy set: the label selects which image patch
    is bright. Up to 10 classes via a 2x5 patch grid on 28x28 images."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, n)
    imgs = (rng.random((n, 28, 28, 1)) * 0.25).astype(np.float32)
    rows = np.linspace(0, 28, 3).astype(int)
    cols = np.linspace(0, 28, 6).astype(int)
    for i, lab in enumerate(labels):
        r, c = divmod(int(lab), 5)
        imgs[i, rows[r] : rows[r + 1], cols[c] : cols[c + 1], 0] += 0.7
    return Dataset(images=imgs, labels=labels.astype(np.int64))


def find_mnist_dir():
    """Real-MNIST location: $MNIST_DIR or <repo>/data/mnist, if populated."""
    candidates = []
    env = os.environ.get("MNIST_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(REPO_ROOT / "data" / "mnist")
    for cand in candidates:
        if cand.is_dir():
            names = {p.name.removesuffix(".gz") for p in cand.iterdir()}
            if {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"} <= names:
                return cand
    return None


@pytest.fixture(scope="session")
def mnist_dir():
    return find_mnist_dir()

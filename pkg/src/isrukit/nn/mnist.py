"""MNIST IDX file parsing.

The IDX format is big-endian: a 4-byte magic (0x00000803 for rank-3 image
files, 0x00000801 for rank-1 label files), one 4-byte big-endian extent
per dimension, then the raw unsigned bytes. Files may be gzip-compressed;
compression is detected from the 0x1F 0x8B prefix, not the filename.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "IdxFormatError",
    "Dataset",
    "IMAGES_MAGIC",
    "LABELS_MAGIC",
    "MNIST_FILES",
    "load_idx",
    "load_mnist",
    "resolve_mnist_paths",
    "load_mnist_dir",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# canonical filenames; each may also carry a .gz suffix
MNIST_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


class IdxFormatError(ValueError):
    """Malformed IDX content; the message names the byte offset."""


@dataclass(frozen=True)
class Dataset:
    """Images scaled to [0, 1] with shape (N, 28, 28, 1); integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise IdxFormatError(
                f"image/label count mismatch: {self.images.shape[0]} images "
                f"vs {self.labels.shape[0]} labels"
            )

    def __len__(self):
        return self.images.shape[0]


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def load_idx(path, expected_magic: int) -> np.ndarray:
    """Parse one IDX file into a uint8 array of the encoded rank."""
    data = _read_bytes(path)
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated header at offset 0 (file has {len(data)} bytes)")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08X} at offset 0, expected 0x{expected_magic:08X}"
        )
    rank = magic & 0xFF
    header_end = 4 + 4 * rank
    if len(data) < header_end:
        raise IdxFormatError(
            f"{path}: truncated dimension header at offset {len(data)}, "
            f"expected {header_end} header bytes"
        )
    dims = struct.unpack(f">{rank}I", data[4:header_end])
    count = int(np.prod(dims))
    if len(data) - header_end != count:
        raise IdxFormatError(
            f"{path}: payload mismatch at offset {header_end}: dims {dims} "
            f"need {count} bytes, found {len(data) - header_end}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=header_end).reshape(dims)


def load_mnist(images_path, labels_path) -> Dataset:
    """Load one (images, labels) IDX pair into a Dataset."""
    images = load_idx(images_path, IMAGES_MAGIC)
    if images.shape[1:] != (28, 28):
        raise IdxFormatError(
            f"{images_path}: unexpected image dimensions {images.shape[1:]} "
            "at offset 8, expected (28, 28)"
        )
    labels = load_idx(labels_path, LABELS_MAGIC)
    if labels.max(initial=0) > 9:
        bad = int(np.argmax(labels > 9))
        raise IdxFormatError(f"{labels_path}: label {labels[bad]} out of range 0-9 at item {bad}")
    scaled = (images.astype(np.float32) / np.float32(255.0)).reshape(-1, 28, 28, 1)
    return Dataset(images=scaled, labels=labels.astype(np.int64))


def resolve_mnist_paths(data_dir):
    """Locate the four canonical files in data_dir (plain or .gz)."""
    root = Path(data_dir)
    found = {}
    missing = []
    for name in MNIST_FILES:
        for candidate in (root / name, root / (name + ".gz")):
            if candidate.is_file():
                found[name] = candidate
                break
        else:
            missing.append(name)
    if missing:
        raise FileNotFoundError(
            f"missing MNIST files under {root}: expected "
            + ", ".join(MNIST_FILES)
            + " (each optionally .gz); not found: "
            + ", ".join(missing)
        )
    return found


def load_mnist_dir(data_dir):
    """(train, test) Datasets from a directory of the four canonical files."""
    paths = resolve_mnist_paths(data_dir)
    train = load_mnist(paths["train-images-idx3-ubyte"], paths["train-labels-idx1-ubyte"])
    test = load_mnist(paths["t10k-images-idx3-ubyte"], paths["t10k-labels-idx1-ubyte"])
    return train, test

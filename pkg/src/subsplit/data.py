"""Datasets: IDX image files and synthetic Gaussian blobs.

IDX layout (big-endian): magic ``0x00000803`` for images followed by
count, rows, cols and then ``count*rows*cols`` unsigned bytes; magic
``0x00000801`` for labels followed by count and ``count`` bytes.
"""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import DTYPE, RngState

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
IDX_NAMES = ("mnist", "fashion", "kmnist")
DATA_ENV = "SUBSPLIT_DATA"


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels_onehot: np.ndarray
    labels_raw: np.ndarray
    name: str = ""

    def __post_init__(self):
        M = self.inputs.shape[0]
        if self.labels_onehot.shape[0] != M or self.labels_raw.shape[0] != M:
            raise ValueError("inputs and labels disagree on the sample count")

    @property
    def M(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.labels_onehot.shape[1]

    def subset(self, idx, name: str | None = None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.inputs[idx], self.labels_onehot[idx], self.labels_raw[idx],
                       self.name if name is None else name)


def one_hot(labels, c: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c})")
    out = np.zeros((labels.size, c), dtype=DTYPE)
    out[np.arange(labels.size), labels] = 1.0
    return out


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _header(raw: bytes, n_ints: int, magic: int, path) -> tuple[int, ...]:
    size = 4 * n_ints
    if len(raw) < size:
        raise IdxFormatError(f"{path}: truncated header")
    vals = struct.unpack(">" + "I" * n_ints, raw[:size])
    if vals[0] != magic:
        raise IdxFormatError(f"{path}: bad magic {vals[0]:#010x}, expected {magic:#010x}")
    return vals[1:]


def load_idx(images_path, labels_path, name: str = "", n_classes: int = 10) -> Dataset:
    """Read an IDX image/label pair; pixels are scaled to [0, 1] and flattened."""
    raw = _read_bytes(images_path)
    count, rows, cols = _header(raw, 4, IMAGES_MAGIC, images_path)
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise IdxFormatError(f"{images_path}: expected {need} bytes, found {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16)

    raw_l = _read_bytes(labels_path)
    (n_labels,) = _header(raw_l, 2, LABELS_MAGIC, labels_path)
    if len(raw_l) < 8 + n_labels:
        raise IdxFormatError(f"{labels_path}: expected {8 + n_labels} bytes, found {len(raw_l)}")
    if n_labels != count:
        raise ValueError(f"{count} images but {n_labels} labels")
    labels = np.frombuffer(raw_l, dtype=np.uint8, count=n_labels, offset=8).astype(np.int64)

    inputs = pixels.reshape(count, rows * cols).astype(DTYPE) / 255.0
    return Dataset(inputs, one_hot(labels, n_classes), labels, name)


def write_idx(ds: Dataset, images_path, labels_path, shape: tuple[int, int] | None = None):
    """Write ``ds`` as an IDX pair. Inputs are quantized to bytes (x * 255)."""
    M, d = ds.inputs.shape
    rows, cols = shape if shape is not None else (1, d)
    if rows * cols != d:
        raise ValueError(f"image shape {shape} does not hold {d} features")
    pixels = np.rint(np.clip(ds.inputs, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, M, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, M))
        fh.write(np.asarray(ds.labels_raw, dtype=np.uint8).tobytes())


def data_root(cli_root=None) -> Path:
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path(cli_root) if cli_root is not None else Path("data")


def load_named(root, name: str, split: str = "train") -> Dataset:
    """Load ``<root>/<name>/<split>-{images,labels}.idx``."""
    if name not in IDX_NAMES:
        raise ValueError(f"unknown IDX dataset {name!r}; expected one of {IDX_NAMES}")
    base = Path(root) / name
    images, labels = base / f"{split}-images.idx", base / f"{split}-labels.idx"
    for path in (images, labels):
        if not path.exists():
            raise FileNotFoundError(f"dataset file missing: expected {path}")
    return load_idx(images, labels, name=f"{name}-{split}")


def _blob_means(c: int, d: int, separation: float, rng: RngState) -> np.ndarray:
    scale = separation
    while True:
        for _ in range(100):
            means = rng.normal((c, d)) * scale
            if c == 1:
                return means
            diff = means[:, None, :] - means[None, :, :]
            dist = np.sqrt((diff ** 2).sum(-1))
            if dist[np.triu_indices(c, 1)].min() >= separation:
                return means
        scale *= 1.5


def synthetic_blobs(c: int, d: int, m: int, separation: float, rng: RngState,
                    name: str = "blobs") -> Dataset:
    """``c`` unit-variance Gaussian clusters of ``m`` points in ``d`` dimensions.

    Cluster means are pairwise at least ``separation`` apart before the
    whole array is rescaled (one global affine map) into [0, 1].
    """
    if min(c, d, m) < 1 or not separation > 0:
        raise ValueError("need c, d, m >= 1 and separation > 0")
    means = _blob_means(c, d, separation, rng)
    labels = np.repeat(np.arange(c), m)
    x = means[labels] + rng.normal((c * m, d))
    order = rng.permutation(c * m)
    x, labels = x[order], labels[order]
    lo, hi = x.min(), x.max()
    x = (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)
    return Dataset(x.astype(DTYPE), one_hot(labels, c), labels, name)


def train_test_split(ds: Dataset, fraction: float, rng: RngState,
                     stratified: bool = False) -> tuple[Dataset, Dataset]:
    """Disjoint train/test partition with ``round(M * fraction)`` training rows."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    if stratified:
        train, test = [], []
        perm = rng.permutation(ds.M)
        for cls in np.unique(ds.labels_raw):
            rows = perm[ds.labels_raw[perm] == cls]
            k = int(round(len(rows) * fraction))
            train.append(rows[:k])
            test.append(rows[k:])
        tr, te = np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
    else:
        k = int(round(ds.M * fraction))
        perm = rng.permutation(ds.M)
        tr, te = np.sort(perm[:k]), np.sort(perm[k:])
    if tr.size == 0 or te.size == 0:
        raise ValueError(f"fraction {fraction} leaves an empty split for M={ds.M}")
    return ds.subset(tr, ds.name + "-train"), ds.subset(te, ds.name + "-test")

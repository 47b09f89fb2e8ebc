"""Dataset ingestion (MNIST IDX, CIFAR-10 binary), normalization, batching,
and the persistent per-sample magnitude store."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ContractError, DataFormatError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3*32*32 pixels
MAGNITUDE_MAGIC = b"ADAMAG01"


@dataclass
class Dataset:
    """Images stay uint8 pixel space; per-channel stats live alongside so the
    same normalization follows the split everywhere (train, eval, replay)."""

    images: np.ndarray  # (N, C, H, W) uint8
    labels: np.ndarray  # (N,) int64
    num_classes: int
    mean: np.ndarray = field(default=None)  # per channel, of pixel/255
    std: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.dtype != np.uint8:
            raise ConfigurationError(
                f"images must be uint8 (N,C,H,W), got {self.images.dtype} {self.images.shape}"
            )
        if self.labels.shape != (self.images.shape[0],):
            raise ConfigurationError(
                f"label count {self.labels.shape} does not match N={self.images.shape[0]}"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigurationError(
                f"labels outside [0, {self.num_classes}): "
                f"min {self.labels.min()}, max {self.labels.max()}"
            )
        if self.mean is None:
            scaled = self.images.astype(np.float64) / 255.0
            self.mean = scaled.mean(axis=(0, 2, 3))
            self.std = scaled.std(axis=(0, 2, 3))

    def __len__(self):
        return self.images.shape[0]


def _read_bytes(path) -> bytes:
    p = Path(path)
    if p.suffix == ".gz":
        with gzip.open(p, "rb") as fh:
            return fh.read()
    return p.read_bytes()


def _idx_header(blob: bytes, path, expect_magic: int, dims: int):
    header = 4 * (1 + dims)
    if len(blob) < header:
        raise DataFormatError(f"truncated IDX header at offset {len(blob)} in {path}")
    magic = struct.unpack_from(">I", blob, 0)[0]
    if magic != expect_magic:
        raise DataFormatError(
            f"bad IDX magic 0x{magic:08x} at offset 0 in {path} (want 0x{expect_magic:08x})"
        )
    extents = struct.unpack_from(f">{dims}I", blob, 4)
    return extents, header


def load_idx_images(path) -> np.ndarray:
    """IDX u8 image file -> (N, 1, H, W) uint8."""
    blob = _read_bytes(path)
    (n, h, w), offset = _idx_header(blob, path, IDX_IMAGE_MAGIC, 3)
    need = n * h * w
    if len(blob) - offset != need:
        raise DataFormatError(
            f"expected {need} pixel bytes at offset {offset} in {path}, found {len(blob) - offset}"
        )
    data = np.frombuffer(blob, dtype=np.uint8, count=need, offset=offset)
    return data.reshape(n, 1, h, w).copy()


def load_idx_labels(path) -> np.ndarray:
    blob = _read_bytes(path)
    (n,), offset = _idx_header(blob, path, IDX_LABEL_MAGIC, 1)
    if len(blob) - offset != n:
        raise DataFormatError(
            f"expected {n} label bytes at offset {offset} in {path}, found {len(blob) - offset}"
        )
    return np.frombuffer(blob, dtype=np.uint8, count=n, offset=offset).astype(np.int64)


def load_cifar10_records(path):
    """One CIFAR-10 binary batch file -> (images (N,3,32,32) u8, labels)."""
    blob = _read_bytes(path)
    if len(blob) == 0 or len(blob) % CIFAR_RECORD_BYTES != 0:
        raise DataFormatError(
            f"CIFAR file length {len(blob)} not a multiple of {CIFAR_RECORD_BYTES} "
            f"(first partial record at offset {len(blob) - len(blob) % CIFAR_RECORD_BYTES}) in {path}"
        )
    records = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    images = records[:, 1:].reshape(-1, 3, 32, 32).copy()
    return images, labels


def serialize_cifar10_records(images: np.ndarray, labels: np.ndarray) -> bytes:
    """Inverse of load_cifar10_records; used for byte-exactness checks."""
    n = images.shape[0]
    records = np.empty((n, CIFAR_RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = labels
    records[:, 1:] = images.reshape(n, -1)
    return records.tobytes()


_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

_CIFAR_FILES = {
    "train": tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    "test": ("test_batch.bin",),
}


def _find_file(root: Path, stem: str) -> Path:
    for candidate in (root / stem, root / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"missing {stem}[.gz] under {root}")


def load_dataset(
    path,
    format: str,
    split: str = "train",
    subset_size: int | None = None,
    subset_seed: int = 0,
) -> Dataset:
    """Load a dataset directory in one of the two supported on-disk formats.

    format: "mnist-idx" (directory of IDX files, .gz accepted) or
    "cifar10-binary" (directory of data_batch_*.bin / test_batch.bin).
    subset_size draws a sorted seeded sample without replacement.
    """
    root = Path(path)
    if split not in ("train", "test"):
        raise ConfigurationError(f"split must be train or test, got {split!r}")
    if format == "mnist-idx":
        image_stem, label_stem = _MNIST_FILES[split]
        images = load_idx_images(_find_file(root, image_stem))
        labels = load_idx_labels(_find_file(root, label_stem))
    elif format == "cifar10-binary":
        parts = [load_cifar10_records(_find_file(root, f)) for f in _CIFAR_FILES[split]]
        images = np.concatenate([p[0] for p in parts])
        labels = np.concatenate([p[1] for p in parts])
    else:
        raise ConfigurationError(f"unknown dataset format {format!r}")
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"image count {images.shape[0]} != label count {labels.shape[0]} under {root}"
        )
    num_classes = int(labels.max()) + 1 if labels.size else 0
    if subset_size is not None:
        if not 0 < subset_size <= images.shape[0]:
            raise ConfigurationError(
                f"subset size {subset_size} invalid for N={images.shape[0]}"
            )
        rng = np.random.default_rng(subset_seed)
        keep = np.sort(rng.choice(images.shape[0], size=subset_size, replace=False))
        images, labels = images[keep], labels[keep]
    return Dataset(images=images, labels=labels, num_classes=num_classes)


# -------------------------------------------------------------- normalization


def normalize(image: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """(p/255 - mean_c)/std_c, channelwise, float64 out."""
    return normalize_batch(image[None], mean, std)[0]


def normalize_batch(images: np.ndarray, mean, std) -> np.ndarray:
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if not (np.isfinite(mean).all() and np.isfinite(std).all()):
        raise ConfigurationError(f"non-finite normalization stats: mean {mean}, std {std}")
    if (std <= 0).any():
        raise ConfigurationError(f"normalization std must be positive, got {std}")
    scaled = images.astype(np.float64) / 255.0
    return (scaled - mean[:, None, None]) / std[:, None, None]


# ------------------------------------------------------------------- batching


def batches(dataset: Dataset, batch_size: int, rng, shuffle: bool = True):
    """Yield (indices, images, labels) covering every sample exactly once.

    Order is a seeded shuffle (or identity when shuffle=False); the final
    short batch is kept. Original dataset indices travel with each batch so
    per-sample state can be addressed through them.
    """
    n = len(dataset)
    if batch_size <= 0:
        raise ContractError(f"batch size must be >= 1, got {batch_size}")
    if batch_size > n:
        raise ContractError(f"batch size {batch_size} exceeds dataset size {n}")
    order = rng.permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        yield idx, dataset.images[idx], dataset.labels[idx]


# ------------------------------------------------------------ magnitude store


class MagnitudeStore:
    """Per-sample magnitudes in [0,1], index-aligned with a dataset.

    Starts all-zero (first epoch trains unaugmented); values written during
    epoch t are the ones read back at epoch t+1.
    """

    def __init__(self, size: int):
        if size <= 0:
            raise ConfigurationError(f"store size must be positive, got {size}")
        self.values = np.zeros(size, dtype=np.float64)

    def __len__(self):
        return self.values.size

    def _check_indices(self, indices) -> np.ndarray:
        idx = np.asarray(indices)
        if idx.size and (idx.min() < 0 or idx.max() >= self.values.size):
            raise ContractError(
                f"store index out of range [0, {self.values.size}): "
                f"min {idx.min()}, max {idx.max()}"
            )
        return idx

    def read(self, indices) -> np.ndarray:
        return self.values[self._check_indices(indices)].copy()

    def write(self, indices, magnitudes):
        idx = self._check_indices(indices)
        vals = np.asarray(magnitudes, dtype=np.float64)
        if vals.shape != idx.shape:
            raise ContractError(
                f"wrote {vals.shape} magnitudes for {idx.shape} indices"
            )
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0 or not np.isfinite(vals).all()):
            raise ContractError("magnitudes must be finite and in [0,1]")
        self.values[idx] = vals

    def save(self, path):
        payload = MAGNITUDE_MAGIC + struct.pack("<Q", self.values.size)
        Path(path).write_bytes(payload + self.values.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "MagnitudeStore":
        blob = Path(path).read_bytes()
        if len(blob) < 16:
            raise DataFormatError(f"truncated magnitude store at offset {len(blob)} in {path}")
        if blob[:8] != MAGNITUDE_MAGIC:
            raise DataFormatError(f"bad magnitude magic {blob[:8]!r} at offset 0 in {path}")
        (n,) = struct.unpack_from("<Q", blob, 8)
        if n == 0:
            raise DataFormatError(f"zero-length magnitude store in {path}")
        if len(blob) != 16 + 8 * n:
            raise DataFormatError(
                f"expected {8 * n} value bytes at offset 16 in {path}, found {len(blob) - 16}"
            )
        values = np.frombuffer(blob, dtype="<f8", count=n, offset=16).copy()
        if not np.isfinite(values).all() or values.min() < 0.0 or values.max() > 1.0:
            raise DataFormatError(f"magnitude values outside [0,1] at offset 16 in {path}")
        store = cls(n)
        store.values = values
        return store

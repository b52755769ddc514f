"""Dataset loading (MNIST IDX, CIFAR-10 binary), subsetting, and batching.

Images are normalized to [0, 1] by dividing raw bytes by 255; no further
standardization is applied.  Nothing here downloads anything: files are
taken from local paths so runs are hermetic.
"""

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DimensionError, FormatError
from .proposals import RngStream, mix64

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + three 32x32 channel planes


@dataclass(frozen=True)
class LabeledDataset:
    """A (n, c, h, w) image tensor in [0, 1] with integer class labels."""

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str

    def __post_init__(self):
        if self.images.ndim != 4:
            raise DimensionError(f"images must be (n, c, h, w), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise DimensionError(
                f"labels shape {self.labels.shape} does not match {self.images.shape[0]} images"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DimensionError(f"labels outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def geometry(self) -> tuple:
        """(c, h, w) of one example."""
        return self.images.shape[1:]


def _read_bytes(path) -> bytes:
    """File contents, transparently gunzipped when the gzip magic leads."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _be32(data: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(data):
        raise FormatError(
            f"{what}: file ends at byte {len(data)}, needed 4 bytes at offset {offset}"
        )
    return int.from_bytes(data[offset:offset + 4], "big")


def _parse_idx(data: bytes, magic: int, rank: int, what: str):
    """Header and payload of one IDX file with the given magic and rank."""
    got = _be32(data, 0, what)
    if got != magic:
        raise FormatError(
            f"{what}: bad magic 0x{got:08X} at offset 0, expected 0x{magic:08X}"
        )
    dims = [_be32(data, 4 + 4 * i, what) for i in range(rank)]
    payload_at = 4 + 4 * rank
    need = int(np.prod(dims)) if dims else 0
    if len(data) - payload_at != need:
        raise FormatError(
            f"{what}: payload of {len(data) - payload_at} bytes at offset {payload_at}, "
            f"header declares {need}"
        )
    return dims, np.frombuffer(data, dtype=np.uint8, offset=payload_at)


def load_mnist_idx(images_path, labels_path) -> LabeledDataset:
    """Parse big-endian IDX image/label files into a (n, 1, h, w) dataset.

    Accepts gzip-compressed files.  Raises FormatError, naming the byte
    offset, on bad magic numbers, truncated payloads, or an image/label
    count mismatch.
    """
    (n, h, w), pixels = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, 3,
                                   f"{images_path}")
    (n_labels,), labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, 1,
                                     f"{labels_path}")
    if n != n_labels:
        raise FormatError(
            f"{images_path} holds {n} images but {labels_path} holds {n_labels} labels"
        )
    if labels.size and labels.max() > 9:
        raise FormatError(f"{labels_path}: label {labels.max()} outside digit range 0..9")
    images = (pixels.astype(np.float64) / 255.0).reshape(n, 1, h, w)
    return LabeledDataset(images, labels.astype(np.int64), 10, "mnist")


def load_cifar10_bin(batch_paths) -> LabeledDataset:
    """Parse CIFAR-10 binary batches into a (n, 3, 32, 32) dataset.

    Each record is 3073 bytes: a label byte, then the R, G, B planes of a
    32x32 image.  Multiple files concatenate in the given order.
    """
    paths = list(batch_paths)
    if not paths:
        raise ConfigurationError("no CIFAR-10 batch files given")
    images, labels = [], []
    for path in paths:
        data = _read_bytes(path)
        if len(data) % CIFAR_RECORD_BYTES:
            raise FormatError(
                f"{path}: {len(data)} bytes is not a multiple of the "
                f"{CIFAR_RECORD_BYTES}-byte record size "
                f"({len(data) % CIFAR_RECORD_BYTES} bytes over)"
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        labels.append(records[:, 0])
        images.append(records[:, 1:].reshape(-1, 3, 32, 32))
    labels = np.concatenate(labels)
    if labels.size and labels.max() > 9:
        raise FormatError(f"label {labels.max()} outside class range 0..9")
    images = np.concatenate(images).astype(np.float64) / 255.0
    return LabeledDataset(images, labels.astype(np.int64), 10, "cifar10")


def subset(dataset: LabeledDataset, count: int, seed: int) -> LabeledDataset:
    """Seeded sample without replacement, stratified by class.

    Per-class quotas follow largest-remainder apportionment of each class's
    share of count, so class proportions survive within one example.  The
    chosen indices are emitted in ascending order; count == len(dataset)
    returns the dataset unchanged.
    """
    n = len(dataset)
    if count > n:
        raise ConfigurationError(f"subset of {count} from {n} examples")
    if count < 0:
        raise ConfigurationError(f"negative subset size {count}")
    classes = np.arange(dataset.num_classes)
    class_counts = np.bincount(dataset.labels, minlength=dataset.num_classes)
    quotas = count * class_counts / n
    take = np.floor(quotas).astype(np.int64)
    remainders = quotas - take
    # Largest remainders win the leftover slots; np.argsort(kind="stable") on
    # the negated remainders breaks ties toward the lower class index.
    leftover = count - int(take.sum())
    for cls in np.argsort(-remainders, kind="stable")[:leftover]:
        take[cls] += 1
    chosen = []
    root = RngStream(seed)
    for cls in classes:
        members = np.flatnonzero(dataset.labels == cls)
        order = root.split("class", int(cls)).permutation(members.size)
        chosen.append(members[order[:take[cls]]])
    idx = np.sort(np.concatenate(chosen))
    return LabeledDataset(
        dataset.images[idx], dataset.labels[idx], dataset.num_classes,
        f"{dataset.name}:subset{count}",
    )


def batches(dataset: LabeledDataset, batch_size: int, shuffle_seed=None, epoch: int = 0):
    """Yield (images, labels) slices covering every example exactly once.

    With a shuffle_seed the index order is a seeded permutation re-drawn
    per epoch (sub-seed mix64(shuffle_seed, epoch)); without one it is the
    stored order.  The final partial batch is kept.
    """
    if batch_size < 1:
        raise ConfigurationError(f"batch size must be >= 1, got {batch_size}")
    n = len(dataset)
    if shuffle_seed is None:
        order = np.arange(n)
    else:
        order = RngStream(mix64(shuffle_seed, epoch)).permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]

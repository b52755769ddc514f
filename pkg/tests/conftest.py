"""Shared fixtures: synthetic datasets, binary-format writers, data discovery.

Real MNIST/CIFAR-10 files are looked up under $BLINDCNN_DATA (default:
<repo>/data).  Tests that need them skip with a pointer when absent; all
mechanical properties run on synthetic fixtures.
"""

import gzip
import os
from pathlib import Path

import numpy as np
import pytest

from blindcnn.config import (
    CIFAR_TEST_FILES,
    CIFAR_TRAIN_FILES,
    MNIST_FILES,
    ExperimentConfig,
)
from blindcnn.datasets import LabeledDataset

DATA_ENV = "BLINDCNN_DATA"


def data_root() -> Path:
    return Path(os.environ.get(DATA_ENV, Path(__file__).resolve().parent.parent / "data"))


def _with_gz(folder: Path, name: str) -> bool:
    return (folder / name).exists() or (folder / (name + ".gz")).exists()


def real_dataset_config(dataset: str, **overrides) -> ExperimentConfig | None:
    """Config pointing at the local real dataset, or None when absent."""
    root = data_root()
    if dataset == "mnist":
        folder = root / "mnist"
        names = [*MNIST_FILES["train"], *MNIST_FILES["test"]]
    else:
        folder = root / "cifar-10-batches-bin"
        names = [*CIFAR_TRAIN_FILES, *CIFAR_TEST_FILES]
    if not all(_with_gz(folder, n) for n in names):
        return None
    return ExperimentConfig(dataset=dataset, data_dir=str(root), **overrides)


def skip_without(dataset: str, what: str):
    pytest.skip(
        f"{what} needs the real {dataset} files under {data_root()} "
        f"(override with ${DATA_ENV}); not found"
    )


# --- synthetic data -------------------------------------------------------

def striped_dataset(n: int, seed: int, classes: int = 10) -> LabeledDataset:
    """Learnable synthetic digits: class k brightens rows 2k..2k+2 of 28x28."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, n)
    images = rng.integers(0, 60, (n, 1, 28, 28))
    for i, k in enumerate(labels):
        images[i, 0, 2 * k:2 * k + 3, :] = 220
    return LabeledDataset(images / 255.0, labels.astype(np.int64), classes, "striped")


def noise_dataset(n: int, seed: int, geometry=(1, 10, 10), classes: int = 10) -> LabeledDataset:
    """Unstructured random images for mechanical (non-learnability) tests."""
    rng = np.random.default_rng(seed)
    images = rng.random((n, *geometry))
    labels = rng.integers(0, classes, n).astype(np.int64)
    return LabeledDataset(images, labels, classes, "noise")


# --- binary fixture writers ----------------------------------------------

def write_idx_images(path: Path, images, compress: bool = False):
    """images: uint8 array (n, h, w)."""
    images = np.asarray(images, dtype=np.uint8)
    n, h, w = images.shape
    blob = (
        (0x00000803).to_bytes(4, "big")
        + n.to_bytes(4, "big") + h.to_bytes(4, "big") + w.to_bytes(4, "big")
        + images.tobytes()
    )
    path.write_bytes(gzip.compress(blob) if compress else blob)


def write_idx_labels(path: Path, labels, compress: bool = False):
    labels = np.asarray(labels, dtype=np.uint8)
    blob = (0x00000801).to_bytes(4, "big") + len(labels).to_bytes(4, "big") + labels.tobytes()
    path.write_bytes(gzip.compress(blob) if compress else blob)


def write_cifar_batch(path: Path, images, labels):
    """images: uint8 (n, 3, 32, 32); labels: (n,)."""
    images = np.asarray(images, dtype=np.uint8).reshape(-1, 3072)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    path.write_bytes(np.hstack([labels, images]).tobytes())


def _striped_bytes(n, seed, h=28, classes=10):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, n)
    images = rng.integers(0, 60, (n, h, h))
    for i, k in enumerate(labels):
        images[i, 2 * k:2 * k + 3, :] = 220
    return images.astype(np.uint8), labels.astype(np.uint8)


def write_mnist_fixture_dir(root: Path, train_n: int = 320, test_n: int = 80,
                            seed: int = 9) -> Path:
    """A data-dir layout the config loader accepts, with striped digits."""
    folder = root / "mnist"
    folder.mkdir(parents=True, exist_ok=True)
    xi, yi = _striped_bytes(train_n, seed)
    xt, yt = _striped_bytes(test_n, seed + 1)
    write_idx_images(folder / MNIST_FILES["train"][0], xi)
    write_idx_labels(folder / MNIST_FILES["train"][1], yi)
    write_idx_images(folder / MNIST_FILES["test"][0], xt)
    write_idx_labels(folder / MNIST_FILES["test"][1], yt)
    return root


def write_cifar_fixture_dir(root: Path, per_batch: int = 40, test_n: int = 40,
                            seed: int = 9) -> Path:
    folder = root / "cifar-10-batches-bin"
    folder.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i, name in enumerate(CIFAR_TRAIN_FILES):
        labels = rng.integers(0, 10, per_batch)
        images = rng.integers(0, 60, (per_batch, 3, 32, 32))
        for j, k in enumerate(labels):
            images[j, 0, 3 * k:3 * k + 3, :] = 220
        write_cifar_batch(folder / name, images, labels)
    labels = rng.integers(0, 10, test_n)
    images = rng.integers(0, 60, (test_n, 3, 32, 32))
    for j, k in enumerate(labels):
        images[j, 0, 3 * k:3 * k + 3, :] = 220
    write_cifar_batch(folder / CIFAR_TEST_FILES[0], images, labels)
    return root


@pytest.fixture(scope="session")
def mnist_fixture_dir(tmp_path_factory) -> Path:
    return write_mnist_fixture_dir(tmp_path_factory.mktemp("fixture-data"))


@pytest.fixture(scope="session")
def cifar_fixture_dir(tmp_path_factory) -> Path:
    return write_cifar_fixture_dir(tmp_path_factory.mktemp("fixture-data-cifar"))

import struct

import numpy as np
import pytest

from qensemble.data import LabeledDataset


def write_idx_images(path, images):
    """images: uint8 array (n, rows, cols)."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.tobytes())


@pytest.fixture(scope="session")
def digits_raw():
    """sklearn 8x8 digits as uint8 images + labels (MNIST-like, bundled)."""
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    bunch = sklearn_datasets.load_digits()
    images = np.round(bunch.images * (255.0 / 16.0)).astype(np.uint8)
    labels = bunch.target.astype(np.uint8)
    return images, labels


@pytest.fixture(scope="session")
def digits_idx(tmp_path_factory, digits_raw):
    """The digits dataset written as IDX files."""
    images, labels = digits_raw
    d = tmp_path_factory.mktemp("idx")
    img_path = d / "images-idx3-ubyte"
    lab_path = d / "labels-idx1-ubyte"
    write_idx_images(img_path, images)
    write_idx_labels(lab_path, labels)
    return str(img_path), str(lab_path)


def toy_separable_dataset():
    """Four linearly separable 16-dim samples (two per class)."""
    X = np.zeros((4, 16))
    X[0, 0] = 1.0
    X[1, 0], X[1, 1] = 1.0, 0.2
    X[2, 8] = 1.0
    X[3, 8], X[3, 9] = 1.0, 0.2
    return LabeledDataset(X, np.array([0, 0, 1, 1]))


def identity_pca(dim):
    from qensemble.data import PcaModel

    return PcaModel(np.zeros(dim), np.eye(dim), dim)

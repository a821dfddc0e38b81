"""Data pipeline: IDX parsing, binary relabeling, train/test split, PCA, bootstrap."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

ORTHO_ATOL = 1e-9


class IdxFormatError(ValueError):
    """Malformed IDX magic, dimension header, or payload length."""


class EmptyDatasetError(ValueError):
    """A selection or resample produced no samples."""


class RankDeficiencyError(ValueError):
    """Covariance rank is below the requested number of components."""


@dataclass
class LabeledDataset:
    """Feature matrix with binary labels, one row per sample."""

    features: np.ndarray  # (n_samples, feature_dim) float64
    labels: np.ndarray    # (n_samples,) int, values in {0, 1}

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if self.features.shape[0] == 0:
            raise EmptyDatasetError("dataset is empty")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be binary {0, 1}")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices)
        return LabeledDataset(self.features[indices], self.labels[indices])


@dataclass
class FeatureVector:
    """PCA-reduced sample ready for amplitude encoding: power-of-two length."""

    values: np.ndarray
    norm: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n = self.values.shape[0]
        if self.values.ndim != 1 or n == 0 or (n & (n - 1)) != 0:
            raise ValueError("feature vector length must be a power of two")
        if self.norm < 0:
            raise ValueError("norm must be nonnegative")


@dataclass
class PcaModel:
    """Frozen PCA transform: orthonormal component rows, descending variance."""

    mean: np.ndarray           # (feature_dim,)
    components: np.ndarray     # (n_components, feature_dim)
    n_components: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.asarray(self.components, dtype=np.float64)
        if self.components.shape != (self.n_components, self.mean.shape[0]):
            raise ValueError("components shape must be (n_components, feature_dim)")
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(self.n_components), atol=ORTHO_ATOL):
            raise ValueError("component rows must be orthonormal")

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Project a (n, feature_dim) matrix onto the components."""
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean) @ self.components.T


def _read_idx(path, expected_magic: int) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    count = int(np.prod(dims))
    payload = raw[header_len:]
    if len(payload) != count:
        raise IdxFormatError(
            f"{path}: payload has {len(payload)} bytes, header promises {count}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_mnist(images_path, labels_path, digit_pair: tuple[int, int]) -> LabeledDataset:
    """Load an IDX image/label pair, keep two digits, relabel to {0, 1}.

    Pixels are scaled to [0, 1]. digit_pair (d0, d1) maps d0 -> 0, d1 -> 1.
    """
    d0, d1 = digit_pair
    if d0 == d1 or not (0 <= d0 <= 9 and 0 <= d1 <= 9):
        raise ValueError(f"digit pair must be two distinct digits, got {digit_pair}")
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {images.shape[0]} != label count {labels.shape[0]}"
        )
    mask = (labels == d0) | (labels == d1)
    if not mask.any():
        raise EmptyDatasetError(f"no samples with digits {d0} or {d1}")
    X = images[mask].reshape(int(mask.sum()), -1).astype(np.float64) / 255.0
    y = (labels[mask] == d1).astype(np.int64)
    return LabeledDataset(X, y)


def split(dataset: LabeledDataset, test_fraction: float, seed: int):
    """Disjoint seeded train/test partition; train size round(n * (1 - f))."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = dataset.n_samples
    n_train = int(round(n * (1.0 - test_fraction)))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    return dataset.take(perm[:n_train]), dataset.take(perm[n_train:])


def fit_pca(train: LabeledDataset, n_components: int) -> PcaModel:
    """Top eigenvectors of the training covariance, descending eigenvalue.

    Sign convention: the largest-magnitude entry of each component is positive.
    """
    if n_components > train.feature_dim:
        raise ValueError("n_components exceeds feature_dim")
    if n_components < 1:
        raise ValueError("n_components must be positive")
    if train.n_samples < 2:
        raise ValueError("PCA needs at least 2 samples")
    mean = train.features.mean(axis=0)
    cov = np.cov(train.features, rowvar=False)
    cov = np.atleast_2d(cov)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    tol = max(eigvals[0], 0.0) * 1e-12
    rank = int(np.sum(eigvals > tol))
    if rank < n_components:
        raise RankDeficiencyError(
            f"covariance rank {rank} < requested components {n_components}"
        )
    components = eigvecs[:, :n_components].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean, components, n_components)


def apply_pca(model: PcaModel, sample: np.ndarray) -> FeatureVector:
    """Center and project one sample; records the Euclidean norm."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.shape != model.mean.shape:
        raise ValueError(
            f"sample length {sample.shape} != feature_dim {model.mean.shape}"
        )
    values = model.components @ (sample - model.mean)
    return FeatureVector(values, float(np.linalg.norm(values)))


def bootstrap_sample(train: LabeledDataset, fraction: float, seed: int) -> LabeledDataset:
    """Draw round(fraction * n) samples uniformly with replacement (bagging)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = train.n_samples
    size = int(round(fraction * n))
    if size == 0:
        raise EmptyDatasetError("bootstrap fraction rounds to zero samples")
    rng = np.random.default_rng(seed)
    return train.take(rng.integers(0, n, size=size))

"""Dataset ingestion (IDX), PCA with inverse transform, feature scaling,
and PGM image output.

The PCA keeps the top-k eigenvectors of the pixel covariance so generated
feature vectors can be mapped back to images with the inverse transform.
Feature scaling sends the observed per-feature training range onto the
generator's output window (0, 1/2^n], and is inverted before the inverse
PCA when rendering generated images.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ValidationError

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
IMAGE_SIDE = 28
SCALE_FLOOR = 1e-6


@dataclass(frozen=True)
class ImageSet:
    """Images as an (N, 28, 28) float array in [0, 1] plus integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if images.ndim != 3 or images.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
            raise ValidationError(
                f"images must have shape (N, {IMAGE_SIDE}, {IMAGE_SIDE}), "
                f"got {images.shape}")
        if labels.shape != (images.shape[0],):
            raise ValidationError(
                f"{images.shape[0]} images but {labels.shape} labels")
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ValidationError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.images.shape[0]

    def for_class(self, label: int) -> "ImageSet":
        mask = self.labels == label
        return ImageSet(self.images[mask], self.labels[mask])

    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), -1)


def _read_exact(f, count: int, path: str, what: str) -> bytes:
    offset = f.tell()
    data = f.read(count)
    if len(data) != count:
        raise DataError(
            f"{path}: truncated {what} at byte offset {offset}: "
            f"wanted {count} bytes, got {len(data)}")
    return data


def _read_be32(f, path: str, what: str) -> int:
    return struct.unpack(">i", _read_exact(f, 4, path, what))[0]


def load_idx(images_path: str, labels_path: str) -> ImageSet:
    """Parse a big-endian IDX image/label file pair into an ImageSet."""
    with open(images_path, "rb") as f:
        magic = _read_be32(f, images_path, "magic number")
        if magic != IDX_IMAGE_MAGIC:
            raise DataError(
                f"{images_path}: bad image magic {magic} at byte offset 0 "
                f"(expected {IDX_IMAGE_MAGIC})")
        count = _read_be32(f, images_path, "image count")
        rows = _read_be32(f, images_path, "row count")
        cols = _read_be32(f, images_path, "column count")
        if (rows, cols) != (IMAGE_SIDE, IMAGE_SIDE):
            raise DataError(
                f"{images_path}: image dimensions {rows}x{cols} at byte "
                f"offset 8, expected {IMAGE_SIDE}x{IMAGE_SIDE}")
        payload = _read_exact(f, count * rows * cols, images_path, "pixel data")
    images = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)

    with open(labels_path, "rb") as f:
        magic = _read_be32(f, labels_path, "magic number")
        if magic != IDX_LABEL_MAGIC:
            raise DataError(
                f"{labels_path}: bad label magic {magic} at byte offset 0 "
                f"(expected {IDX_LABEL_MAGIC})")
        label_count = _read_be32(f, labels_path, "label count")
        labels = np.frombuffer(
            _read_exact(f, label_count, labels_path, "label data"), dtype=np.uint8)

    if label_count != count:
        raise DataError(
            f"{images_path} holds {count} images but {labels_path} holds "
            f"{label_count} labels")
    return ImageSet(images / 255.0, labels.astype(int))


def split_train_val(data: ImageSet, val_fraction: float = 0.1,
                    shuffle_seed: int = 20240) -> tuple:
    """Deterministic shuffled train/validation split (default 90/10)."""
    if not 0.0 < val_fraction < 1.0:
        raise ValidationError(f"val_fraction must be in (0, 1), got {val_fraction}")
    n = len(data)
    if n < 2:
        raise DataError(f"need at least 2 images to split, got {n}")
    order = np.random.default_rng(shuffle_seed).permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    return (ImageSet(data.images[train_idx], data.labels[train_idx]),
            ImageSet(data.images[val_idx], data.labels[val_idx]))


@dataclass(frozen=True)
class PcaModel:
    """Top-k principal components of a training set plus scaling bounds."""

    mean: np.ndarray          # (784,)
    components: np.ndarray    # (k, 784), rows orthonormal
    eigenvalues: np.ndarray   # (k,), nonincreasing
    scale_lo: np.ndarray      # (k,) per-feature training minima
    scale_hi: np.ndarray      # (k,) per-feature training maxima

    def __post_init__(self):
        for name in ("mean", "components", "eigenvalues", "scale_lo", "scale_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.components.ndim != 2 or self.components.shape[1] != self.mean.shape[0]:
            raise ValidationError("component rows must match the mean length")
        if np.any(np.diff(self.eigenvalues) > 1e-9):
            raise ValidationError("eigenvalues must be nonincreasing")
        if np.any(self.scale_lo >= self.scale_hi):
            raise ValidationError("scale bounds must satisfy lo < hi per feature")

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def feature_window_top(self) -> float:
        """Upper edge of the generator output window, 1/2^n with k = 2^n."""
        return 1.0 / self.k


def fit_pca(train: ImageSet, k: int) -> PcaModel:
    """Eigendecompose the pixel covariance and keep the top-k components."""
    n = len(train)
    if k < 1 or k > IMAGE_SIDE * IMAGE_SIDE:
        raise ValidationError(f"k must be in [1, {IMAGE_SIDE**2}], got {k}")
    if n < k + 1:
        raise DataError(f"need at least {k + 1} images to fit {k} components, got {n}")
    x = train.flat()
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)       # ascending
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T
    eigenvalues = np.maximum(eigvals[order], 0.0)
    weights = centered @ components.T
    lo, hi = weights.min(axis=0), weights.max(axis=0)
    degenerate = hi - lo <= 0
    if degenerate.any():
        raise DataError(
            f"feature(s) {np.nonzero(degenerate)[0].tolist()} have degenerate "
            "scale bounds (lo = hi); not enough variation in the training data")
    return PcaModel(mean, components, eigenvalues, lo, hi)


def transform(model: PcaModel, image) -> np.ndarray:
    """Project pixel vectors onto the component rows: w = C (x - mean)."""
    x = np.asarray(image, dtype=float)
    if x.shape[-1] != model.mean.shape[0]:
        raise ValidationError(
            f"expected trailing dimension {model.mean.shape[0]}, got {x.shape}")
    return (x - model.mean) @ model.components.T


def inverse_transform(model: PcaModel, weights) -> np.ndarray:
    """Reconstruct pixel vectors from feature weights: x = mean + C^T w."""
    w = np.asarray(weights, dtype=float)
    if w.shape[-1] != model.k:
        raise ValidationError(f"expected trailing dimension {model.k}, got {w.shape}")
    return model.mean + w @ model.components


def scale_features(model: PcaModel, weights) -> np.ndarray:
    """Affine per-feature map of [lo_j, hi_j] onto [1e-6, 1/2^n], no clipping."""
    w = np.asarray(weights, dtype=float)
    top = model.feature_window_top
    span = model.scale_hi - model.scale_lo
    return SCALE_FLOOR + (w - model.scale_lo) * (top - SCALE_FLOOR) / span


def unscale_features(model: PcaModel, scaled) -> np.ndarray:
    """Exact inverse of scale_features on each feature axis."""
    s = np.asarray(scaled, dtype=float)
    top = model.feature_window_top
    span = model.scale_hi - model.scale_lo
    return model.scale_lo + (s - SCALE_FLOOR) * span / (top - SCALE_FLOOR)


PCA_FORMAT = "rydgan-pca"
PCA_VERSION = 1


def save_pca(model: PcaModel, path: str):
    doc = {
        "format": PCA_FORMAT,
        "version": PCA_VERSION,
        "k": model.k,
        "pixels": int(model.mean.shape[0]),
        "mean": model.mean.tolist(),
        "components_shape": list(model.components.shape),
        "components": model.components.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "scale_lo": model.scale_lo.tolist(),
        "scale_hi": model.scale_hi.tolist(),
    }
    atomic_write_text(path, json.dumps(doc, indent=1))


def load_pca(path: str) -> PcaModel:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid model file: {exc}") from exc
    if doc.get("format") != PCA_FORMAT:
        raise DataError(f"{path}: not a {PCA_FORMAT} document")
    if doc.get("version") != PCA_VERSION:
        raise DataError(f"{path}: unsupported version {doc.get('version')}")
    components = np.array(doc["components"], dtype=float)
    if list(components.shape) != doc["components_shape"]:
        raise DataError(f"{path}: component shape header does not match data")
    return PcaModel(np.array(doc["mean"]), components,
                    np.array(doc["eigenvalues"]),
                    np.array(doc["scale_lo"]), np.array(doc["scale_hi"]))


def atomic_write_text(path: str, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


def atomic_write_bytes(path: str, payload: bytes):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)


def pgm_bytes(pixels) -> bytes:
    """8-bit binary PGM (P5): clamp to [0, 1], scale by 255, round."""
    grid = np.asarray(pixels, dtype=float)
    if grid.ndim != 2:
        raise ValidationError(f"expected a 2-D pixel grid, got shape {grid.shape}")
    if not np.isfinite(grid).all():
        raise ValidationError("pixel grid contains non-finite values")
    levels = np.rint(np.clip(grid, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P5\n{grid.shape[1]} {grid.shape[0]}\n255\n".encode("ascii")
    return header + levels.tobytes()


def write_image(pixels, path: str):
    atomic_write_bytes(path, pgm_bytes(pixels))


def write_montage(images, path: str, cols: int | None = None, pad: int = 2):
    """Combine a batch of equal-size grids into one PGM contact sheet."""
    batch = [np.asarray(im, dtype=float) for im in images]
    if not batch:
        raise ValidationError("montage needs at least one image")
    h, w = batch[0].shape
    if cols is None:
        cols = int(math.ceil(math.sqrt(len(batch))))
    rows = -(-len(batch) // cols)
    sheet = np.zeros((rows * (h + pad) - pad, cols * (w + pad) - pad))
    for i, im in enumerate(batch):
        r, c = divmod(i, cols)
        sheet[r * (h + pad):r * (h + pad) + h, c * (w + pad):c * (w + pad) + w] = im
    write_image(sheet, path)

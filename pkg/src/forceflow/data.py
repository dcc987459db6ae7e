"""Datasets: synthetic Gaussian mixtures, IDX image files, CSV round-trips.

Points are always float64 arrays of shape (n, s); labels, when present, are
small non-negative integers aligned with the rows.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, IdxFormatError

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
GZIP_MAGIC = b"\x1f\x8b"


@dataclass
class Dataset:
    """Rows of input vectors with optional integer labels.

    ``ids`` keeps the original row index of each point so that subsetting
    stays traceable back to the source file.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise DataError(f"points must be 2-d, got shape {self.points.shape}")
        n = self.points.shape[0]
        if n < 2:
            raise DataError(f"need at least 2 points, got {n}")
        if self.points.shape[1] < 1:
            raise DataError("points must have at least one feature")
        if not np.all(np.isfinite(self.points)):
            raise DataError("points contain non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise DataError(
                    f"labels shape {self.labels.shape} does not match {n} points"
                )
        if self.ids is None:
            self.ids = np.arange(n, dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if self.ids.shape != (n,):
                raise DataError(f"ids shape {self.ids.shape} does not match {n} points")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, mask_or_index: np.ndarray) -> "Dataset":
        idx = np.asarray(mask_or_index)
        return Dataset(
            points=self.points[idx],
            labels=None if self.labels is None else self.labels[idx],
            ids=self.ids[idx],
        )

    def filter_classes(self, classes, per_class_limit: int | None = None) -> "Dataset":
        """Keep only rows whose label is in ``classes``.

        When ``per_class_limit`` is given, keep the first ``per_class_limit``
        rows of each class in file order (deterministic subsetting for
        desk-scale runs).
        """
        if self.labels is None:
            raise DataError("dataset has no labels to filter on")
        classes = [int(c) for c in classes]
        keep = []
        for c in classes:
            rows = np.flatnonzero(self.labels == c)
            if rows.size == 0:
                raise DataError(f"class {c} absent from dataset")
            if per_class_limit is not None:
                rows = rows[:per_class_limit]
            keep.append(rows)
        idx = np.sort(np.concatenate(keep))
        return self.subset(idx)


@dataclass
class GaussianCluster:
    """One isotropic Gaussian blob: N(center, covariance * I)."""

    center: np.ndarray
    covariance: float
    count: int

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).ravel()
        if self.covariance <= 0:
            raise ConfigError(f"covariance must be positive, got {self.covariance}")
        if self.count < 1:
            raise ConfigError(f"count must be >= 1, got {self.count}")


@dataclass
class SyntheticGaussianSpec:
    """A mixture of isotropic Gaussians in R^dimension."""

    dimension: int
    clusters: list[GaussianCluster] = field(default_factory=list)

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dimension}")
        if not self.clusters:
            raise ConfigError("need at least one cluster")
        for c in self.clusters:
            if c.center.shape != (self.dimension,):
                raise ConfigError(
                    f"cluster center shape {c.center.shape} does not match "
                    f"dimension {self.dimension}"
                )

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "clusters": [
                {
                    "center": [float(v) for v in c.center],
                    "covariance": float(c.covariance),
                    "count": int(c.count),
                }
                for c in self.clusters
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticGaussianSpec":
        return cls(
            dimension=int(d["dimension"]),
            clusters=[
                GaussianCluster(
                    center=np.asarray(c["center"], dtype=np.float64),
                    covariance=float(c["covariance"]),
                    count=int(c["count"]),
                )
                for c in d["clusters"]
            ],
        )


def separated_gaussians_spec(
    separation: float,
    n_clusters: int = 2,
    count: int = 500,
    dimension: int = 20,
    covariance: float = 1.0,
) -> SyntheticGaussianSpec:
    """Clusters placed at 0, sep*e1, 2*sep*e1, ... along the first axis."""
    clusters = []
    for i in range(n_clusters):
        center = np.zeros(dimension)
        center[0] = separation * i
        clusters.append(GaussianCluster(center=center, covariance=covariance, count=count))
    return SyntheticGaussianSpec(dimension=dimension, clusters=clusters)


def gen_gaussians(spec: SyntheticGaussianSpec, seed: int) -> Dataset:
    """Sample the mixture; labels are the cluster indices, rows in cluster order."""
    rng = np.random.default_rng(seed)
    parts = []
    labels = []
    for k, c in enumerate(spec.clusters):
        std = float(np.sqrt(c.covariance))
        parts.append(rng.normal(0.0, 1.0, size=(c.count, spec.dimension)) * std + c.center)
        labels.append(np.full(c.count, k, dtype=np.int64))
    return Dataset(points=np.vstack(parts), labels=np.concatenate(labels))


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == GZIP_MAGIC:
        raw = gzip.decompress(raw)
    return raw


def _idx_header(raw: bytes, expected_magic: int, n_dims: int, path: str) -> tuple:
    header_len = 4 * (1 + n_dims)
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: truncated header", offset=len(raw))
    fields = struct.unpack(f">{1 + n_dims}I", raw[:header_len])
    if fields[0] != expected_magic:
        raise IdxFormatError(
            f"{path}: bad magic {fields[0]}, expected {expected_magic}", offset=0
        )
    return fields[1:]


def load_idx_images(path: str) -> np.ndarray:
    """Read an IDX3 image file into an (n, rows*cols) float array in [0, 1]."""
    raw = _read_bytes(path)
    n, rows, cols = _idx_header(raw, IDX_IMAGE_MAGIC, 3, path)
    need = 16 + n * rows * cols
    if len(raw) < need:
        raise IdxFormatError(
            f"{path}: expected {need} bytes for {n} images of {rows}x{cols}",
            offset=len(raw),
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, count=n * rows * cols, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path: str) -> np.ndarray:
    """Read an IDX1 label file into an (n,) int array."""
    raw = _read_bytes(path)
    (n,) = _idx_header(raw, IDX_LABEL_MAGIC, 1, path)
    need = 8 + n
    if len(raw) < need:
        raise IdxFormatError(
            f"{path}: expected {need} bytes for {n} labels", offset=len(raw)
        )
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Pair an IDX image file with its label file."""
    points = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(points) != len(labels):
        raise DataError(
            f"image count {len(points)} does not match label count {len(labels)}"
        )
    return Dataset(points=points, labels=labels)

"""Gaussian-weighted k-nearest-neighbor interpolation of force samples.

A field evaluates anywhere in the plane as the weighted average of the forces
at the k nearest anchors, with weights exp(-d^2 / 2 sigma^2). Both k and
sigma have data-driven defaults taken from the anchor layout:

* sigma: the mean distance to the 5th nearest other anchor.
* k: the smallest k whose mean k-th-neighbor distance exceeds 2 sigma, so the
  neighborhood comfortably covers the weight kernel's support.

Ties at the k-th neighbor boundary resolve to the lowest anchor index. A
query whose weights all underflow below 1e-300 returns the zero vector and
bumps the field's underflow counter.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DataError
from .forcefield import ForceSampleSet

SIGMA_NEIGHBOR_RANK = 5
UNDERFLOW_LIMIT = 1e-300
COVERAGE_FACTOR = 2.0


class NeighborhoodSaturationWarning(UserWarning):
    """auto_k hit n - 1 without covering 2 sigma; the anchors are too sparse."""


@dataclass
class InterpolatedField:
    """A force field defined over the whole plane by its anchors.

    The anchors never move; flowing points repeatedly query this frozen
    field. ``underflow_count`` tallies queries that landed so far from every
    anchor that all weights vanished.
    """

    anchors: np.ndarray
    forces: np.ndarray
    k: int
    sigma: float
    kind: str
    Z: float
    flipped: bool
    k_saturated: bool = False
    underflow_count: int = 0
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=np.float64)
        self.forces = np.asarray(self.forces, dtype=np.float64)
        n = self.anchors.shape[0]
        if self.anchors.ndim != 2 or self.anchors.shape[1] != 2:
            raise DataError(f"anchors must be (n, 2), got {self.anchors.shape}")
        if self.forces.shape != self.anchors.shape:
            raise DataError("forces shape must match anchors")
        if not 1 <= self.k <= n:
            raise ConfigError(f"k must be in [1, n={n}], got {self.k}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        self._tree = cKDTree(self.anchors)

    @property
    def n(self) -> int:
        return self.anchors.shape[0]


def auto_sigma(anchors: np.ndarray) -> float:
    """Mean distance to the 5th nearest other anchor."""
    anchors = np.asarray(anchors, dtype=np.float64)
    n = anchors.shape[0]
    if n < SIGMA_NEIGHBOR_RANK + 1:
        raise DataError(
            f"auto_sigma needs at least {SIGMA_NEIGHBOR_RANK + 1} anchors, got {n}"
        )
    tree = cKDTree(anchors)
    d, _ = tree.query(anchors, k=SIGMA_NEIGHBOR_RANK + 1)
    sigma = float(d[:, SIGMA_NEIGHBOR_RANK].mean())
    if sigma <= 0:
        raise DataError("anchors are degenerate: 5th neighbor distance is zero")
    return sigma


def _auto_k(anchors: np.ndarray, sigma: float) -> tuple[int, bool]:
    """Smallest k with mean k-th-neighbor distance > 2 sigma; flag saturation.

    Neighbor distances are fetched in doubling batches so desk-scale anchor
    sets never materialize the full n x n distance table.
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    n = anchors.shape[0]
    if n < 2:
        raise DataError("auto_k needs at least 2 anchors")
    threshold = COVERAGE_FACTOR * sigma
    tree = cKDTree(anchors)
    batch = min(32, n - 1)
    d = None
    fetched = 0
    while True:
        if fetched < batch:
            d, _ = tree.query(anchors, k=batch + 1)  # column 0 is the point itself
            fetched = batch
        means = d[:, 1 : fetched + 1].mean(axis=0)
        above = np.flatnonzero(means > threshold)
        if above.size:
            return int(above[0]) + 1, False
        if fetched >= n - 1:
            return n - 1, True
        batch = min(2 * batch, n - 1)
    raise AssertionError("unreachable")


def auto_k(anchors: np.ndarray, sigma: float) -> int:
    """Public wrapper around the k rule; warns when the rule saturates at n-1."""
    k, saturated = _auto_k(anchors, sigma)
    if saturated:
        warnings.warn(
            f"mean neighbor distance never exceeded {COVERAGE_FACTOR} * sigma; "
            f"using k = n - 1 = {k}",
            NeighborhoodSaturationWarning,
            stacklevel=2,
        )
    return k


def build_field(
    samples: ForceSampleSet, k: int | None = None, sigma: float | None = None
) -> InterpolatedField:
    """Freeze a sample set into a queryable field; defaults derived as documented."""
    if sigma is None:
        sigma = auto_sigma(samples.anchors)
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    saturated = False
    if k is None:
        k, saturated = _auto_k(samples.anchors, sigma)
    return InterpolatedField(
        anchors=samples.anchors,
        forces=samples.forces,
        k=int(k),
        sigma=float(sigma),
        kind=samples.kind,
        Z=samples.Z,
        flipped=samples.flipped,
        k_saturated=saturated,
    )


def _knn_lowest_index(field: InterpolatedField, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """k nearest anchors per query, ties at the boundary broken by lowest index."""
    n, k = field.n, field.k
    if k >= n:
        d2 = ((ys[:, None, :] - field.anchors[None, :, :]) ** 2).sum(axis=2)
        idx = np.broadcast_to(np.arange(n), d2.shape)
        return d2, idx
    d, idx = field._tree.query(ys, k=k + 1)
    if ys.shape[0] == 1 and d.ndim == 1:
        d, idx = d[None, :], idx[None, :]
    tied = np.flatnonzero(d[:, k - 1] == d[:, k])
    d2 = d[:, :k] ** 2
    idx = idx[:, :k].copy()
    for r in tied:
        dd = ((ys[r] - field.anchors) ** 2).sum(axis=1)
        order = np.lexsort((np.arange(n), dd))[:k]
        idx[r] = order
        d2[r] = dd[order]
    return d2, idx


def interpolate_many(ys: np.ndarray, field: InterpolatedField) -> np.ndarray:
    """Evaluate the field at each row of ys; shape (m, 2) in, (m, 2) out."""
    ys = np.asarray(ys, dtype=np.float64)
    if ys.ndim != 2 or ys.shape[1] != 2:
        raise DataError(f"queries must be (m, 2), got {ys.shape}")
    if not np.all(np.isfinite(ys)):
        raise DataError("queries contain non-finite values")
    d2, idx = _knn_lowest_index(field, ys)
    w = np.exp(-d2 / (2.0 * field.sigma**2))
    dead = np.all(w < UNDERFLOW_LIMIT, axis=1)
    out = np.zeros_like(ys)
    live = ~dead
    if np.any(live):
        wl = w[live]
        out[live] = (wl[:, :, None] * field.forces[idx[live]]).sum(axis=1) / wl.sum(
            axis=1
        )[:, None]
    n_dead = int(dead.sum())
    if n_dead:
        field.underflow_count += n_dead
    return out


def interpolate(y: np.ndarray, field: InterpolatedField) -> np.ndarray:
    """Evaluate the field at a single point."""
    y = np.asarray(y, dtype=np.float64).reshape(1, 2)
    return interpolate_many(y, field)[0]


@dataclass
class MeanField:
    """Arithmetic mean of several fields over a shared coordinate plane.

    Members come from repeated runs on the same dataset; no alignment is
    applied, so averaging only makes sense when the member embeddings live in
    comparable frames (e.g. the deterministic PCA init).
    """

    members: list[InterpolatedField]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ConfigError(f"mean field needs >= 2 members, got {len(self.members)}")

    @property
    def kind(self) -> str:
        kinds = sorted({m.kind for m in self.members})
        return kinds[0] if len(kinds) == 1 else "mixed(" + ",".join(kinds) + ")"

    @property
    def underflow_count(self) -> int:
        return sum(m.underflow_count for m in self.members)


def mean_interpolate_many(ys: np.ndarray, mean: MeanField) -> np.ndarray:
    """Average of every member's interpolation at each query point."""
    acc = interpolate_many(ys, mean.members[0]).copy()
    for m in mean.members[1:]:
        acc += interpolate_many(ys, m)
    return acc / len(mean.members)


def query_field(ys: np.ndarray, field: InterpolatedField | MeanField) -> np.ndarray:
    """Uniform entry point for single and mean fields."""
    if isinstance(field, MeanField):
        return mean_interpolate_many(ys, field)
    return interpolate_many(ys, field)


@dataclass
class FieldGrid:
    """Field vectors sampled on a regular grid (for quiver plots and CSV dumps)."""

    bbox: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    nx: int
    ny: int
    vectors: np.ndarray  # (ny, nx, 2); row i sweeps x at fixed y_i

    def __post_init__(self):
        xmin, xmax, ymin, ymax = self.bbox
        if not (xmin < xmax and ymin < ymax):
            raise ConfigError(f"degenerate bbox {self.bbox}")
        if self.nx < 2 or self.ny < 2:
            raise ConfigError("grid needs at least 2 samples per axis")
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape != (self.ny, self.nx, 2):
            raise DataError(
                f"vectors shape {self.vectors.shape} != ({self.ny}, {self.nx}, 2)"
            )

    @property
    def x_coords(self) -> np.ndarray:
        xmin, xmax, _, _ = self.bbox
        return np.linspace(xmin, xmax, self.nx)

    @property
    def y_coords(self) -> np.ndarray:
        _, _, ymin, ymax = self.bbox
        return np.linspace(ymin, ymax, self.ny)

    @property
    def points(self) -> np.ndarray:
        """Grid points as (ny*nx, 2), x varying fastest."""
        X, Y = np.meshgrid(self.x_coords, self.y_coords)
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def magnitudes(self) -> np.ndarray:
        return np.sqrt((self.vectors**2).sum(axis=2))


def sample_grid(
    field: InterpolatedField | MeanField,
    bbox: tuple[float, float, float, float],
    nx: int = 50,
    ny: int = 50,
) -> FieldGrid:
    """Evaluate the field on an nx x ny lattice spanning bbox (inclusive)."""
    grid = FieldGrid(bbox=bbox, nx=nx, ny=ny, vectors=np.zeros((ny, nx, 2)))
    vec = query_field(grid.points, field)
    grid.vectors = vec.reshape(ny, nx, 2)
    return grid

"""Flow points through a frozen force field and find where they collect.

Each iteration moves every tracked point by the field value at its current
position: y <- y + F(y). The field's anchors never move, so the dynamics are
those of test particles in a static flow, not a second t-SNE optimization.
After T iterations, sinks are the epsilon-connected components of the final
positions (single linkage: two points share a component when some chain of
pairwise distances <= epsilon connects them).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DataError, NumericalError
from .interpolator import InterpolatedField, MeanField, auto_sigma, query_field

EPSILON_SIGMA_FACTOR = 0.5
NON_CONVERGED_DIAMETER_FACTOR = 10.0


@dataclass
class FlowResult:
    """Positions before and after T flow iterations, with snapshots between."""

    initial: np.ndarray
    final: np.ndarray
    snapshots: list[tuple[int, np.ndarray]]
    iterations: int
    field_kind: str
    underflow_count: int


@dataclass
class SinkClustering:
    """Epsilon-connected components of flowed points, largest first.

    ``non_converged`` flags components whose diameter exceeds 10 * epsilon;
    they are reported as sinks all the same.
    """

    labels: np.ndarray
    sizes: np.ndarray
    centers: np.ndarray
    epsilon: float
    non_converged: np.ndarray

    @property
    def n_sinks(self) -> int:
        return len(self.sizes)


def default_checkpoints(T: int) -> list[int]:
    """{0, T/8, T/4, T/2, T} with integer division, deduplicated, sorted."""
    return sorted({0, T // 8, T // 4, T // 2, T})


def flow(
    Y0: np.ndarray,
    field: InterpolatedField | MeanField,
    T: int,
    checkpoints: list[int] | None = None,
) -> FlowResult:
    """Iterate y <- y + F(y) for T steps against the frozen field.

    Snapshots are stored at the requested iterations (defaults above); the
    initial positions are always recorded as iteration 0. Checkpoints outside
    [0, T] are a configuration error. Field values are applied as-is, with no
    step-size scaling.
    """
    Y = np.array(Y0, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != 2:
        raise DataError(f"positions must be (n, 2), got {Y.shape}")
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    cps = default_checkpoints(T) if checkpoints is None else sorted(set(int(c) for c in checkpoints))
    bad = [c for c in cps if c < 0 or c > T]
    if bad:
        raise ConfigError(f"checkpoints {bad} outside [0, {T}]")
    cpset = set(cps)
    underflow_before = field.underflow_count
    snapshots: list[tuple[int, np.ndarray]] = [(0, Y.copy())]
    for t in range(1, T + 1):
        Y = Y + query_field(Y, field)
        if not np.all(np.isfinite(Y)):
            bad_pt = int(np.flatnonzero(~np.isfinite(Y).all(axis=1))[0])
            raise NumericalError(f"point {bad_pt} diverged at flow iteration {t}")
        if t in cpset:
            snapshots.append((t, Y.copy()))
    return FlowResult(
        initial=np.array(Y0, dtype=np.float64),
        final=Y,
        snapshots=snapshots,
        iterations=T,
        field_kind=getattr(field, "kind"),
        underflow_count=field.underflow_count - underflow_before,
    )


class _UnionFind:
    """Array union-find with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]


def default_epsilon(original_embedding: np.ndarray) -> float:
    """Half the interpolation length scale of the original embedding."""
    return EPSILON_SIGMA_FACTOR * auto_sigma(original_embedding)


def detect_sinks(points: np.ndarray, epsilon: float) -> SinkClustering:
    """Single-linkage components at scale epsilon, labeled by descending size.

    Equal-size components are ordered by their smallest member index, so
    labels are deterministic. Component centers are the member means.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DataError(f"points must be (n, 2), got {points.shape}")
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    n = points.shape[0]
    uf = _UnionFind(n)
    pairs = cKDTree(points).query_pairs(epsilon, output_type="ndarray")
    for i, j in pairs:
        uf.union(int(i), int(j))
    roots = np.array([uf.find(i) for i in range(n)])
    unique_roots, first_member = np.unique(roots, return_index=True)
    sizes = np.array([(roots == r).sum() for r in unique_roots])
    order = np.lexsort((first_member, -sizes))
    labels = np.empty(n, dtype=np.int64)
    centers = np.empty((len(unique_roots), 2))
    out_sizes = np.empty(len(unique_roots), dtype=np.int64)
    non_converged = np.zeros(len(unique_roots), dtype=bool)
    for new_label, pos in enumerate(order):
        members = roots == unique_roots[pos]
        labels[members] = new_label
        centers[new_label] = points[members].mean(axis=0)
        out_sizes[new_label] = sizes[pos]
        non_converged[new_label] = _diameter(points[members]) > NON_CONVERGED_DIAMETER_FACTOR * epsilon
    return SinkClustering(
        labels=labels,
        sizes=out_sizes,
        centers=centers,
        epsilon=float(epsilon),
        non_converged=non_converged,
    )


def _diameter(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.max()))


def cluster_means(data_points: np.ndarray, clustering: SinkClustering) -> np.ndarray:
    """Mean input-space vector of each sink's members, in label order."""
    data_points = np.asarray(data_points, dtype=np.float64)
    if len(data_points) != len(clustering.labels):
        raise DataError("data rows do not match clustering labels")
    m = clustering.n_sinks
    out = np.empty((m, data_points.shape[1]))
    for lbl in range(m):
        out[lbl] = data_points[clustering.labels == lbl].mean(axis=0)
    return out


@dataclass
class CompositionReport:
    """Per-sink class composition under majority rule.

    ``counts[s, c]`` is how many members of sink s carry class ``classes[c]``.
    A member is misclassified when its class is not its sink's majority class
    (ties resolve to the smallest class label).
    """

    classes: np.ndarray
    counts: np.ndarray
    majority: np.ndarray
    misclassified_per_class: np.ndarray
    total_misclassified: int
    purity: float

    def to_dict(self) -> dict:
        return {
            "classes": self.classes.tolist(),
            "counts": self.counts.tolist(),
            "majority": self.majority.tolist(),
            "misclassified_per_class": self.misclassified_per_class.tolist(),
            "total_misclassified": int(self.total_misclassified),
            "purity": float(self.purity),
        }


def label_composition(clustering: SinkClustering, class_labels: np.ndarray) -> CompositionReport:
    """Cross-tabulate sinks against true classes and apply majority rule."""
    class_labels = np.asarray(class_labels, dtype=np.int64)
    if class_labels.shape != clustering.labels.shape:
        raise DataError("class labels do not match clustering labels")
    classes = np.unique(class_labels)
    m = clustering.n_sinks
    counts = np.zeros((m, len(classes)), dtype=np.int64)
    for s in range(m):
        members = class_labels[clustering.labels == s]
        for c_idx, c in enumerate(classes):
            counts[s, c_idx] = int((members == c).sum())
    majority = classes[np.argmax(counts, axis=1)]
    mis_per_class = np.zeros(len(classes), dtype=np.int64)
    for s in range(m):
        for c_idx, c in enumerate(classes):
            if c != majority[s]:
                mis_per_class[c_idx] += counts[s, c_idx]
    total = int(mis_per_class.sum())
    n = len(class_labels)
    return CompositionReport(
        classes=classes,
        counts=counts,
        majority=majority,
        misclassified_per_class=mis_per_class,
        total_misclassified=total,
        purity=1.0 - total / n,
    )

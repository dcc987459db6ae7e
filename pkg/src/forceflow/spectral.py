"""Graph Laplacian eigenmaps: the spectral baseline for the force view.

For an undirected graph with adjacency A and degree matrix D, the Laplacian
L = D - A drives everything here:

* the smoothness energy <x, Lx> = sum over edges (x_i - x_j)^2,
* its gradient 2 L x, so one explicit smoothing step is
  x <- x - 2 eps L x, i.e. each vertex moves toward its neighbors,
* eigenvectors are the forces that the smoothing flow merely rescales:
  (L f)_i = lambda f_i componentwise.

Eigenmaps are the d smallest nontrivial eigenpairs of the dense L (the
constant vector with eigenvalue 0 is skipped). Dense symmetric solvers keep
the results deterministic at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DataError, DisconnectedGraphError

KNN_GRAPH_K = 10
ZERO_EIGENVALUE_TOL = 1e-8


@dataclass
class Graph:
    """Undirected graph as a symmetric nonnegative adjacency matrix, no loops."""

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DataError(f"adjacency must be square, got {A.shape}")
        if A.shape[0] < 2:
            raise DataError("graph needs at least 2 vertices")
        if not np.all(np.isfinite(A)):
            raise DataError("adjacency has non-finite entries")
        if np.any(A < 0):
            raise DataError("adjacency has negative weights")
        if np.any(np.diagonal(A) != 0):
            raise DataError("self loops are not allowed")
        if not np.array_equal(A, A.T):
            raise DataError("adjacency must be symmetric")
        self.adjacency = A

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """Edge list (m, 2) with i < j, for iteration in tests and demos."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return np.column_stack([i, j])

    def is_connected(self) -> bool:
        n = self.n
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            v = stack.pop()
            for u in np.flatnonzero(self.adjacency[v]):
                if not seen[u]:
                    seen[u] = True
                    stack.append(int(u))
        return bool(seen.all())


def path_graph(n: int) -> Graph:
    """The path on n vertices: edges (0,1), (1,2), ..., (n-2, n-1)."""
    if n < 2:
        raise ConfigError(f"path graph needs n >= 2, got {n}")
    A = np.zeros((n, n))
    idx = np.arange(n - 1)
    A[idx, idx + 1] = 1.0
    A[idx + 1, idx] = 1.0
    return Graph(adjacency=A)


def knn_graph(points: np.ndarray, k: int = KNN_GRAPH_K) -> Graph:
    """Symmetric k-nearest-neighbor graph: edge when either endpoint selects the other."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k < n:
        raise ConfigError(f"k must be in [1, n-1={n - 1}], got {k}")
    _, idx = cKDTree(points).query(points, k=k + 1)
    A = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    cols = idx[:, 1:].ravel()
    A[rows, cols] = 1.0
    A = np.maximum(A, A.T)
    np.fill_diagonal(A, 0.0)
    return Graph(adjacency=A)


def laplacian(graph: Graph) -> np.ndarray:
    """L = D - A with D the diagonal degree (row-sum) matrix."""
    A = graph.adjacency
    return np.diag(A.sum(axis=1)) - A


def quadratic_form(x: np.ndarray, graph: Graph) -> float:
    """Smoothness energy <x, Lx>; equals the sum of squared edge differences."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (graph.n,):
        raise DataError(f"x must have shape ({graph.n},), got {x.shape}")
    return float(x @ (laplacian(graph) @ x))


def quadratic_form_gradient(x: np.ndarray, graph: Graph) -> np.ndarray:
    """d/dx <x, Lx> = 2 L x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (graph.n,):
        raise DataError(f"x must have shape ({graph.n},), got {x.shape}")
    return 2.0 * (laplacian(graph) @ x)


def smooth_step(x: np.ndarray, graph: Graph, eps: float) -> np.ndarray:
    """One explicit smoothing step x - eps * 2 L x.

    Componentwise every vertex moves toward its neighbors:
    x_i + 2 eps sum over neighbors j of (x_j - x_i).
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    return x - eps * quadratic_form_gradient(x, graph)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    scale = np.abs(v).max()
    nz = np.flatnonzero(np.abs(v) > 1e-12 * max(scale, 1.0))
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def eigenmaps(graph: Graph, d: int) -> tuple[np.ndarray, np.ndarray]:
    """The d smallest nontrivial Laplacian eigenpairs of a connected graph.

    Returns (values (d,), vectors (n, d)), eigenvalues ascending. The constant
    eigenvector at eigenvalue 0 is skipped. Vectors have unit norm, are
    orthogonal to the constant vector, and carry a fixed sign (first
    component above the noise floor is positive). Repeated eigenvalues make
    the individual vectors basis-dependent; only the spanned subspace is
    canonical, which is enough for deterministic reruns on one platform.
    """
    if not 1 <= d <= graph.n - 1:
        raise ConfigError(f"d must be in [1, n-1={graph.n - 1}], got {d}")
    if not graph.is_connected():
        raise DisconnectedGraphError(
            "eigenmaps need a connected graph (the zero eigenvalue is repeated otherwise)"
        )
    vals, vecs = np.linalg.eigh(laplacian(graph))
    if vals[0] > ZERO_EIGENVALUE_TOL or (graph.n > 1 and vals[1] <= ZERO_EIGENVALUE_TOL):
        raise DisconnectedGraphError(
            f"unexpected zero-eigenvalue structure: leading eigenvalues {vals[:3]}"
        )
    take_vals = vals[1 : d + 1].copy()
    take_vecs = np.empty((graph.n, d))
    for c in range(d):
        take_vecs[:, c] = _fix_sign(vecs[:, c + 1])
    return take_vals, take_vecs


def force_identity_residual(graph: Graph, f: np.ndarray, lam: float) -> float:
    """max_i |(L f)_i - lam * f_i|: how exactly f behaves as a force eigenmode."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (graph.n,):
        raise DataError(f"f must have shape ({graph.n},), got {f.shape}")
    return float(np.abs(laplacian(graph) @ f - lam * f).max())

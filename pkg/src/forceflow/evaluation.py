"""Clustering quality of embeddings: k-means and permutation-matched accuracy.

k-means is the plain Lloyd iteration with k-means++ seeding, restarted from
several seeds and keeping the lowest within-cluster sum of squares. Cluster
labels are arbitrary, so accuracy against ground truth maximizes over all
label permutations (exhaustive; capped at 8 distinct labels).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import ConfigError, DataError

KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
MAX_PERMUTATION_CLASSES = 8


def _kmeanspp_seed(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining mass at the chosen centers; fall back to uniform
            centers[i] = X[rng.integers(n)]
        else:
            centers[i] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    labels = np.full(X.shape[0], -1)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        own_d2 = d2[np.arange(len(X)), new_labels]
        for c in range(k):
            members = new_labels == c
            if not np.any(members):
                # empty cluster: reseed from the point farthest from its centroid
                far = int(np.argmax(own_d2))
                centers[c] = X[far]
                new_labels[far] = c
                own_d2[far] = 0.0
                members = new_labels == c
            centers[c] = X[members].mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    wcss = float(d2[np.arange(len(X)), labels].sum())
    return labels, centers, wcss


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    restarts: int = KMEANS_RESTARTS,
    max_iter: int = KMEANS_MAX_ITER,
) -> np.ndarray:
    """Cluster rows of X into k groups; best of ``restarts`` runs by WCSS."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"X must be 2-d, got shape {X.shape}")
    if not 1 <= k <= X.shape[0]:
        raise ConfigError(f"k must be in [1, n={X.shape[0]}], got {k}")
    if restarts < 1:
        raise ConfigError(f"restarts must be >= 1, got {restarts}")
    rng = np.random.default_rng(seed)
    best_labels, best_wcss = None, np.inf
    for _ in range(restarts):
        centers = _kmeanspp_seed(X, k, rng)
        labels, _, wcss = _lloyd(X, centers.copy(), max_iter)
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    return best_labels


def best_match_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Accuracy maximized over permutations of the predicted label alphabet."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise DataError("pred and truth must have the same length")
    alphabet = np.unique(np.concatenate([pred, truth]))
    if len(alphabet) > MAX_PERMUTATION_CLASSES:
        raise ConfigError(
            f"{len(alphabet)} distinct labels exceed the exhaustive "
            f"permutation cap of {MAX_PERMUTATION_CLASSES}"
        )
    index = {lbl: i for i, lbl in enumerate(alphabet)}
    m = len(alphabet)
    conf = np.zeros((m, m), dtype=np.int64)
    for p, t in zip(pred, truth):
        conf[index[p], index[t]] += 1
    best = 0
    for perm in permutations(range(m)):
        best = max(best, sum(conf[i, perm[i]] for i in range(m)))
    return best / len(pred)


@dataclass
class EvalReport:
    """Side-by-side k-means accuracy on the original and flowed embeddings."""

    k: int
    accuracy_original: float
    accuracy_flowed: float
    n_sinks: int | None = None
    sink_purity: float | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "accuracy_original": self.accuracy_original,
            "accuracy_flowed": self.accuracy_flowed,
            "n_sinks": self.n_sinks,
            "sink_purity": self.sink_purity,
        }


def evaluate_embeddings(
    Y_original: np.ndarray,
    Y_flowed: np.ndarray,
    truth: np.ndarray,
    k: int,
    seed: int = 0,
    restarts: int = KMEANS_RESTARTS,
) -> EvalReport:
    """k-means both embeddings with the same settings and compare accuracy."""
    truth = np.asarray(truth, dtype=np.int64)
    acc_orig = best_match_accuracy(kmeans(Y_original, k, seed=seed, restarts=restarts), truth)
    acc_flow = best_match_accuracy(kmeans(Y_flowed, k, seed=seed, restarts=restarts), truth)
    return EvalReport(k=k, accuracy_original=acc_orig, accuracy_flowed=acc_flow)

"""Exact t-SNE on the full n x n affinity matrix, run to equilibrium.

The optimizer mirrors the common reference schedule: early exaggeration 12x
for 250 iterations, momentum 0.5 then 0.8, learning rate n/12, gradient
descent until the max per-point gradient norm drops below tolerance or the
iteration cap is reached. No adaptive gains; the plain momentum update keeps
the equilibrium condition meaningful.

Low-dimensional similarities use the Student-t kernel
    w_ij = 1 / (1 + ||y_i - y_j||^2),   q_ij = w_ij / Z,   Z = sum_{k != l} w_kl
and the cost is KL(P || Q). The gradient and its attraction/repulsion split
    grad_i = 4 * sum_j (p_ij - q_ij) w_ij (y_i - y_j)
    attraction_i = sum_j p_ij q_ij Z (y_i - y_j)
    repulsion_i  = sum_j q_ij^2  Z (y_i - y_j)
satisfy attraction - repulsion = grad / 4 identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affinity import AffinityMatrix, pairwise_sq_dists
from .data import Dataset
from .errors import ConfigError, DataError, NumericalError

INIT_MODES = ("pca", "random")
INIT_SCALE = 1e-4


@dataclass
class TsneConfig:
    """Optimizer settings; defaults follow the reference schedule."""

    perplexity: float = 30.0
    learning_rate: float | None = None  # None means n / early_exaggeration
    early_exaggeration: float = 12.0
    early_exaggeration_iters: int = 250
    max_iters: int = 750
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch_iter: int = 250
    grad_tol: float = 1e-5
    init: str = "pca"
    seed: int = 0

    def __post_init__(self):
        if self.perplexity <= 1:
            raise ConfigError(f"perplexity must exceed 1, got {self.perplexity}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.early_exaggeration < 1:
            raise ConfigError("early_exaggeration must be >= 1")
        if self.early_exaggeration_iters < 0 or self.max_iters < self.early_exaggeration_iters:
            raise ConfigError(
                "need 0 <= early_exaggeration_iters <= max_iters, got "
                f"{self.early_exaggeration_iters} / {self.max_iters}"
            )
        if not 0 <= self.initial_momentum < 1 or not 0 <= self.final_momentum < 1:
            raise ConfigError("momentum values must lie in [0, 1)")
        if self.grad_tol <= 0:
            raise ConfigError("grad_tol must be positive")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}, got {self.init!r}")

    def resolved_learning_rate(self, n: int) -> float:
        if self.learning_rate is not None:
            return float(self.learning_rate)
        return n / self.early_exaggeration

    def to_dict(self) -> dict:
        return {
            "perplexity": self.perplexity,
            "learning_rate": self.learning_rate,
            "early_exaggeration": self.early_exaggeration,
            "early_exaggeration_iters": self.early_exaggeration_iters,
            "max_iters": self.max_iters,
            "initial_momentum": self.initial_momentum,
            "final_momentum": self.final_momentum,
            "momentum_switch_iter": self.momentum_switch_iter,
            "grad_tol": self.grad_tol,
            "init": self.init,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TsneConfig":
        return cls(**d)


@dataclass
class Embedding:
    """A 2-d embedding at (or near) gradient equilibrium."""

    Y: np.ndarray
    Q: np.ndarray
    Z: float
    cost: float
    iterations_run: int
    converged: bool

    @property
    def n(self) -> int:
        return self.Y.shape[0]


@dataclass
class TraceRecord:
    """One optimizer step: KL cost against the true P and gradient max-norm."""

    iteration: int
    cost: float
    grad_max_norm: float


def pca_init(data: Dataset, seed: int = 0) -> np.ndarray:
    """Project onto the top-2 principal axes, scaled so column 0 has std 1e-4.

    Deterministic: the seed is accepted for interface parity with
    ``random_init`` but unused. Axis signs are fixed by making the largest
    component of each principal direction positive. A second axis with zero
    variance (or 1-d inputs) pads the second coordinate with zeros.
    """
    del seed
    X = data.points - data.points.mean(axis=0)
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    for i in range(min(2, Vt.shape[0])):
        j = np.argmax(np.abs(Vt[i]))
        if Vt[i, j] < 0:
            Vt[i] = -Vt[i]
            U[:, i] = -U[:, i]
    proj = U[:, :2] * S[:2]
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - proj.shape[1]))])
    spread = proj[:, 0].std()
    if spread == 0:
        raise DataError("first principal component has zero variance")
    return proj * (INIT_SCALE / spread)


def random_init(n: int, seed: int = 0) -> np.ndarray:
    """Gaussian init with std 1e-4, matching the PCA init scale."""
    if n < 2:
        raise DataError(f"need at least 2 points, got {n}")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, INIT_SCALE, size=(n, 2))


def output_affinities(Y: np.ndarray) -> tuple[np.ndarray, float]:
    """Student-t joint Q and its normalizer Z for the embedding Y."""
    W = _student_weights(Y)
    Z = float(W.sum())
    if Z <= 0:
        raise NumericalError("Student-t normalizer Z is zero")
    return W / Z, Z


def _student_weights(Y: np.ndarray) -> np.ndarray:
    W = 1.0 / (1.0 + pairwise_sq_dists(Y))
    np.fill_diagonal(W, 0.0)
    return W


def kl_cost(P: np.ndarray, Q: np.ndarray) -> float:
    """KL(P || Q) over the off-diagonal support of P."""
    mask = P > 0
    if np.any(Q[mask] <= 0):
        raise NumericalError("Q vanishes on the support of P")
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Exact KL gradient 4 * sum_j (p_ij - q_ij) w_ij (y_i - y_j)."""
    W = _student_weights(Y)
    Q = W / W.sum()
    M = (P - Q) * W
    return 4.0 * (M.sum(axis=1)[:, None] * Y - M @ Y)


def decompose_forces(P: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Attraction and repulsion components; attraction - repulsion = grad / 4."""
    W = _student_weights(Y)
    Q = W / W.sum()
    A = P * W  # p_ij q_ij Z  ==  p_ij w_ij
    R = Q * W  # q_ij^2  Z  ==  q_ij w_ij
    attraction = A.sum(axis=1)[:, None] * Y - A @ Y
    repulsion = R.sum(axis=1)[:, None] * Y - R @ Y
    return attraction, repulsion


def run_tsne(
    affinities: AffinityMatrix,
    init: np.ndarray,
    config: TsneConfig,
    trace: list[TraceRecord] | None = None,
) -> Embedding:
    """Gradient descent with momentum until equilibrium or the iteration cap.

    Convergence is only tested after the early exaggeration phase, against the
    unexaggerated gradient; ``converged`` records whether the tolerance was hit
    before ``max_iters``. The embedding is recentered every step (the cost is
    translation invariant). When ``trace`` is a list, one record per examined
    iterate is appended (cost against the true P, exaggerated gradients during
    the first phase).
    """
    P = affinities.P
    n = P.shape[0]
    Y = np.array(init, dtype=np.float64)
    if Y.shape != (n, 2):
        raise DataError(f"init shape {Y.shape} does not match ({n}, 2)")
    lr = config.resolved_learning_rate(n)
    velocity = np.zeros_like(Y)
    converged = False
    iterations_run = 0
    for it in range(1, config.max_iters + 1):
        exaggerating = it <= config.early_exaggeration_iters
        P_eff = P * config.early_exaggeration if exaggerating else P
        W = _student_weights(Y)
        Z = W.sum()
        if Z <= 0 or not np.isfinite(Z):
            raise NumericalError(f"similarities degenerated at iteration {it} (Z={Z})")
        Q = W / Z
        M = (P_eff - Q) * W
        grad = 4.0 * (M.sum(axis=1)[:, None] * Y - M @ Y)
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"gradient diverged at iteration {it}")
        grad_max = float(np.sqrt((grad * grad).sum(axis=1).max()))
        if trace is not None:
            trace.append(TraceRecord(it, kl_cost(P, Q), grad_max))
        if not exaggerating and grad_max < config.grad_tol:
            converged = True
            break
        momentum = (
            config.initial_momentum
            if it <= config.momentum_switch_iter
            else config.final_momentum
        )
        velocity = momentum * velocity - lr * grad
        Y = Y + velocity
        if not np.all(np.isfinite(Y)):
            raise NumericalError(f"embedding diverged at iteration {it}")
        Y = Y - Y.mean(axis=0)
        iterations_run = it
    Q, Z = output_affinities(Y)
    return Embedding(
        Y=Y,
        Q=Q,
        Z=Z,
        cost=kl_cost(P, Q),
        iterations_run=iterations_run,
        converged=converged,
    )


def embed(data: Dataset, config: TsneConfig | None = None,
          trace: list[TraceRecord] | None = None) -> tuple[Embedding, AffinityMatrix]:
    """Affinities + init + optimize in one call."""
    from .affinity import compute_affinities

    config = config or TsneConfig()
    aff = compute_affinities(data, config.perplexity)
    if config.init == "pca":
        init = pca_init(data, config.seed)
    else:
        init = random_init(data.n, config.seed)
    return run_tsne(aff, init, config, trace), aff

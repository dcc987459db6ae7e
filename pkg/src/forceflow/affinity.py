"""Input-space affinities with perplexity-calibrated Gaussian bandwidths.

Conditional distributions p_{j|i} use per-point bandwidths sigma_i chosen by
bisection so that 2^H(p_{.|i}) matches the requested perplexity. The joint
matrix is the symmetrized form P = (p_{j|i} + p_{i|j}) / (2n), which sums
to one over all entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError, NumericalError

SIGMA_LO = 1e-12
SIGMA_HI = 1e12
MAX_BISECTION_STEPS = 100
# relative bracket width at which a row's bisection is considered exhausted
BRACKET_RTOL = 1e-10
PERPLEXITY_RTOL = 1e-5


@dataclass
class AffinityMatrix:
    """Symmetrized joint affinities P plus the bandwidths that produced them."""

    P: np.ndarray
    sigmas: np.ndarray
    perplexity: float

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.sigmas = np.asarray(self.sigmas, dtype=np.float64)
        n = self.P.shape[0]
        if self.P.shape != (n, n):
            raise DataError(f"P must be square, got shape {self.P.shape}")
        if self.sigmas.shape != (n,):
            raise DataError("sigmas length does not match P")
        if not np.all(np.isfinite(self.P)):
            raise NumericalError("P contains non-finite entries")
        if np.any(self.P < 0):
            raise DataError("P has negative entries")
        if np.any(np.diagonal(self.P) != 0):
            raise DataError("P must have a zero diagonal")
        if not np.allclose(self.P, self.P.T, atol=1e-12, rtol=0):
            raise DataError("P must be symmetric")
        if abs(self.P.sum() - 1.0) > 1e-8:
            raise DataError(f"P must sum to 1, got {self.P.sum()!r}")
        if np.any(self.sigmas <= 0):
            raise DataError("sigmas must be positive")

    @property
    def n(self) -> int:
        return self.P.shape[0]


def pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    """All squared Euclidean distances, exact zero diagonal, clipped at 0."""
    X = np.asarray(points, dtype=np.float64)
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_perplexities(d2: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Perplexity 2^H of each conditional row for the given bandwidths.

    Rows are evaluated in a shifted kernel (subtracting the smallest
    off-diagonal distance) so that extreme bandwidths do not underflow the
    whole row during the bisection search.
    """
    n = d2.shape[0]
    off = ~np.eye(n, dtype=bool)
    d2_off = np.where(off, d2, np.inf)
    shift = d2_off.min(axis=1)
    arg = -(d2 - shift[:, None]) / (2.0 * sigmas[:, None] ** 2)
    arg[~off] = -np.inf  # the diagonal would otherwise overflow exp
    E = np.exp(arg)
    s = E.sum(axis=1)
    Pc = E / s[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(Pc > 0, Pc * np.log2(Pc), 0.0)
    H = -plogp.sum(axis=1)
    return 2.0**H


def calibrate_bandwidths(d2: np.ndarray, perplexity: float) -> np.ndarray:
    """Bisect sigma_i per row until 2^H(p_{.|i}) hits the target perplexity.

    The search runs each row's bracket down to relative width 1e-10 (or 100
    steps) rather than stopping at the perplexity tolerance, so the returned
    bandwidths are reproducible to many digits. The residual check at the end
    still enforces the 1e-5 relative perplexity contract.
    """
    n = d2.shape[0]
    if not 1.0 < perplexity < n:
        raise ConfigError(f"perplexity must be in (1, n={n}), got {perplexity}")
    lo = np.full(n, SIGMA_LO)
    hi = np.full(n, SIGMA_HI)
    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        perp = _row_perplexities(d2, mid)
        too_high = perp > perplexity
        hi = np.where(too_high, mid, hi)
        lo = np.where(too_high, lo, mid)
        if np.all(hi - lo <= BRACKET_RTOL * mid):
            break
    sigmas = 0.5 * (lo + hi)
    residual = np.abs(_row_perplexities(d2, sigmas) - perplexity) / perplexity
    bad = np.flatnonzero(residual > PERPLEXITY_RTOL)
    if bad.size:
        raise NumericalError(
            f"perplexity calibration failed for rows {bad[:10].tolist()} "
            f"(worst relative residual {residual[bad].max():.3e}); "
            "rows with many duplicate points cannot reach the target"
        )
    return sigmas


def conditional_affinities(d2: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Row-stochastic p_{j|i} = exp(-d2_ij / 2 sigma_i^2) / row sum, zero diagonal."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    K = np.exp(-d2 / (2.0 * sigmas[:, None] ** 2))
    np.fill_diagonal(K, 0.0)
    s = K.sum(axis=1)
    dead = np.flatnonzero(s <= 0)
    if dead.size:
        raise NumericalError(
            f"conditional rows {dead[:10].tolist()} underflowed to zero"
        )
    return K / s[:, None]

def symmetrize(cond: np.ndarray, sigmas: np.ndarray, perplexity: float) -> AffinityMatrix:
    """Joint affinities P = (p_{j|i} + p_{i|j}) / (2n); sums to one."""
    n = cond.shape[0]
    P = (cond + cond.T) / (2.0 * n)
    return AffinityMatrix(P=P, sigmas=sigmas, perplexity=perplexity)


def compute_affinities(data: Dataset, perplexity: float = 30.0) -> AffinityMatrix:
    """Full chain: distances, bandwidth calibration, conditionals, symmetrization."""
    d2 = pairwise_sq_dists(data.points)
    sigmas = calibrate_bandwidths(d2, perplexity)
    cond = conditional_affinities(d2, sigmas)
    return symmetrize(cond, sigmas, perplexity)

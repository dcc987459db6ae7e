"""Force samples extracted at the embedded points.

Four kinds of per-point vector samples over an equilibrium embedding:

* ``modified_attraction``: f_i = sum_{j != i} Z (y_i - y_j) sum_{k != i} p_ik q_kj,
  the attraction each point would feel if its neighbors' similarity mass were
  routed through the output kernel. Vanishes identically for n = 2.
* ``raw_attraction``: the attraction term of the KL gradient split.
* ``repulsion``: the repulsion term of the split.
* ``negative_gradient``: the full descent direction, -grad.

The literal formulas produce vectors pointing from neighbors toward the
sampled point (the update rule supplies the minus sign in plain t-SNE), so a
flow along them expands the embedding. ``flip_sign`` negates the samples; the
default True was fixed by checking which orientation contracts a well
separated two-cluster embedding onto sinks. Every artifact records the flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import AffinityMatrix
from .embedder import Embedding, decompose_forces, gradient
from .errors import ConfigError, DataError

FIELD_KINDS = ("modified_attraction", "raw_attraction", "repulsion", "negative_gradient")

# Pinned empirically: the literal modified-attraction direction expands a
# two-Gaussian equilibrium embedding; the flipped field contracts each
# cluster onto interior sinks. See tests/test_forcefield.py.
DEFAULT_FLIP_SIGN = True


@dataclass
class ForceSampleSet:
    """Force vectors sampled at anchor positions."""

    anchors: np.ndarray
    forces: np.ndarray
    kind: str
    Z: float
    flipped: bool

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=np.float64)
        self.forces = np.asarray(self.forces, dtype=np.float64)
        if self.anchors.ndim != 2 or self.anchors.shape[1] != 2:
            raise DataError(f"anchors must be (n, 2), got {self.anchors.shape}")
        if self.forces.shape != self.anchors.shape:
            raise DataError("forces shape must match anchors")
        if self.kind not in FIELD_KINDS:
            raise ConfigError(f"kind must be one of {FIELD_KINDS}, got {self.kind!r}")

    @property
    def n(self) -> int:
        return self.anchors.shape[0]


def _resolve_flip(flip_sign: bool | None) -> bool:
    return DEFAULT_FLIP_SIGN if flip_sign is None else bool(flip_sign)


def _wrap(Y, F, kind, Z, flipped) -> ForceSampleSet:
    if flipped:
        F = -F
    return ForceSampleSet(anchors=Y.copy(), forces=F, kind=kind, Z=Z, flipped=flipped)


def modified_attraction(
    affinities: AffinityMatrix, emb: Embedding, flip_sign: bool | None = None
) -> ForceSampleSet:
    """Neighbor-of-neighbor attraction f_i = Z sum_j (y_i - y_j) [P Q]_ij.

    p_ii = 0, so the inner sum over k != i is the plain matrix product P Q.
    """
    P, Q, Y, Z = affinities.P, emb.Q, emb.Y, emb.Z
    M = P @ Q
    F = Z * (M.sum(axis=1)[:, None] * Y - M @ Y)
    return _wrap(Y, F, "modified_attraction", Z, _resolve_flip(flip_sign))


def raw_attraction(
    affinities: AffinityMatrix, emb: Embedding, flip_sign: bool | None = None
) -> ForceSampleSet:
    """The attraction term sum_j p_ij q_ij Z (y_i - y_j) of the gradient split."""
    attraction, _ = decompose_forces(affinities.P, emb.Y)
    return _wrap(emb.Y, attraction, "raw_attraction", emb.Z, _resolve_flip(flip_sign))


def repulsion(
    affinities: AffinityMatrix, emb: Embedding, flip_sign: bool | None = False
) -> ForceSampleSet:
    """The repulsion term sum_j q_ij^2 Z (y_i - y_j); already points outward."""
    _, rep = decompose_forces(affinities.P, emb.Y)
    return _wrap(emb.Y, rep, "repulsion", emb.Z, bool(flip_sign))


def negative_gradient(
    affinities: AffinityMatrix, emb: Embedding, flip_sign: bool | None = False
) -> ForceSampleSet:
    """The full descent direction -grad; unambiguous, so flipping defaults off."""
    F = -gradient(affinities.P, emb.Y)
    return _wrap(emb.Y, F, "negative_gradient", emb.Z, bool(flip_sign))


def extract(
    kind: str,
    affinities: AffinityMatrix,
    emb: Embedding,
    flip_sign: bool | None = None,
) -> ForceSampleSet:
    """Dispatch by kind name (CLI entry point)."""
    if kind == "modified_attraction":
        return modified_attraction(affinities, emb, flip_sign)
    if kind == "raw_attraction":
        return raw_attraction(affinities, emb, flip_sign)
    if kind == "repulsion":
        return repulsion(affinities, emb, False if flip_sign is None else flip_sign)
    if kind == "negative_gradient":
        return negative_gradient(affinities, emb, False if flip_sign is None else flip_sign)
    raise ConfigError(f"unknown field kind {kind!r}")

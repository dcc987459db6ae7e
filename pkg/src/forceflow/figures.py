"""Deterministic SVG figures: embedding scatters and field quivers.

Rendering is pinned to the Agg backend with a fixed hash salt and no date
metadata, so the same inputs produce byte-identical SVG files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .interpolator import FieldGrid

plt.rcParams["svg.hashsalt"] = "forceflow"

_SAVE_OPTS = {"format": "svg", "metadata": {"Date": None}}
_CMAP = "tab10"


def scatter_svg(
    path,
    Y: np.ndarray,
    labels: np.ndarray | None = None,
    title: str = "",
    point_size: float = 4.0,
) -> None:
    """Scatter of a 2-d embedding, colored by integer labels when given."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if labels is None:
        ax.scatter(Y[:, 0], Y[:, 1], s=point_size, c="black")
    else:
        labels = np.asarray(labels)
        for lbl in np.unique(labels):
            mask = labels == lbl
            ax.scatter(Y[mask, 0], Y[mask, 1], s=point_size,
                       color=plt.get_cmap(_CMAP)(int(lbl) % 10), label=str(lbl))
        ax.legend(markerscale=3, fontsize=8)
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def quiver_svg(path, grid: FieldGrid, title: str = "") -> None:
    """Quiver plot of a sampled field, arrows shaded by magnitude."""
    fig, ax = plt.subplots(figsize=(6, 6))
    pts = grid.points
    vec = grid.vectors.reshape(-1, 2)
    mag = grid.magnitudes.ravel()
    ax.quiver(pts[:, 0], pts[:, 1], vec[:, 0], vec[:, 1], mag,
              cmap="viridis", angles="xy")
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def trajectory_svg(path, snapshots, title: str = "") -> None:
    """Small multiples: one panel per flow snapshot."""
    n = len(snapshots)
    fig, axes = plt.subplots(1, n, figsize=(3 * n, 3), squeeze=False)
    for ax, (t, Y) in zip(axes[0], snapshots):
        ax.scatter(Y[:, 0], Y[:, 1], s=2, c="black")
        ax.set_title(f"t = {t}", fontsize=9)
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)

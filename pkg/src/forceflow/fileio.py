"""On-disk formats: CSV tables, JSON sidecars, PGM images.

All CSVs are UTF-8 with a header row. Floats are written with ``repr`` so a
read-modify-write cycle is bitwise stable and values round-trip exactly.
JSON is written with sorted keys and a trailing newline for the same reason.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import DataError
from .flow import FlowResult, SinkClustering
from .forcefield import ForceSampleSet
from .interpolator import FieldGrid, InterpolatedField

EMBEDDING_HEADER = ["x", "y"]
FIELD_HEADER = ["x", "y", "fx", "fy"]
GRID_HEADER = ["x", "y", "fx", "fy", "magnitude"]
TRACE_HEADER = ["iteration", "cost", "grad_max_norm"]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path: str | Path, header: list[str], rows: np.ndarray) -> None:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != len(header):
        raise DataError(f"rows shape {rows.shape} does not match header {header}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: str | Path, expected_header: list[str] | None = None) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if expected_header is not None and header != ",".join(expected_header):
            raise DataError(
                f"{path}: header {header!r} != expected {','.join(expected_header)!r}"
            )
        try:
            rows = [
                [float(tok) for tok in line.strip().split(",")]
                for line in fh
                if line.strip()
            ]
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric cell ({exc})") from exc
    if not rows:
        return np.empty((0, len(header.split(","))))
    out = np.array(rows, dtype=np.float64)
    if out.ndim != 2 or len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: ragged rows")
    return out


def write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def save_embedding(path: str | Path, Y: np.ndarray) -> None:
    write_csv(path, EMBEDDING_HEADER, Y)


def load_embedding(path: str | Path) -> np.ndarray:
    return read_csv(path, EMBEDDING_HEADER)


def save_dataset(base: str | Path, points: np.ndarray, labels: np.ndarray | None) -> None:
    """points.csv (+ labels.csv with one integer per row when labels exist)."""
    base = Path(base)
    points = np.asarray(points, dtype=np.float64)
    header = [f"f{i}" for i in range(points.shape[1])]
    write_csv(base / "points.csv", header, points)
    if labels is not None:
        with open(base / "labels.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("label\n")
            for v in np.asarray(labels, dtype=np.int64):
                fh.write(f"{int(v)}\n")


def load_dataset(base: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    base = Path(base)
    points = read_csv(base / "points.csv")
    labels = None
    lpath = base / "labels.csv"
    if lpath.exists():
        with open(lpath, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "label":
                raise DataError(f"{lpath}: unexpected header {header!r}")
            labels = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
        if len(labels) != len(points):
            raise DataError(f"{base}: labels/points length mismatch")
    return points, labels


def _field_sidecar(kind: str, Z: float, flipped: bool,
                   k: int | None = None, sigma: float | None = None,
                   k_saturated: bool | None = None) -> dict:
    payload = {"kind": kind, "Z": Z, "flip_sign": bool(flipped)}
    if k is not None:
        payload["k"] = int(k)
        payload["sigma"] = float(sigma)
        payload["k_saturated"] = bool(k_saturated)
    return payload


def save_force_samples(base: str | Path, samples: ForceSampleSet, name: str = "field") -> None:
    """name.csv with anchors and forces plus name.json with the provenance."""
    base = Path(base)
    rows = np.hstack([samples.anchors, samples.forces])
    write_csv(base / f"{name}.csv", FIELD_HEADER, rows)
    write_json(base / f"{name}.json", _field_sidecar(samples.kind, samples.Z, samples.flipped))


def load_force_samples(base: str | Path, name: str = "field") -> ForceSampleSet:
    base = Path(base)
    rows = read_csv(base / f"{name}.csv", FIELD_HEADER)
    meta = read_json(base / f"{name}.json")
    return ForceSampleSet(
        anchors=rows[:, :2],
        forces=rows[:, 2:],
        kind=meta["kind"],
        Z=float(meta["Z"]),
        flipped=bool(meta["flip_sign"]),
    )


def save_field(base: str | Path, field: InterpolatedField, name: str = "field") -> None:
    """Same layout as force samples, sidecar extended with k and sigma."""
    base = Path(base)
    rows = np.hstack([field.anchors, field.forces])
    write_csv(base / f"{name}.csv", FIELD_HEADER, rows)
    write_json(
        base / f"{name}.json",
        _field_sidecar(field.kind, field.Z, field.flipped,
                       k=field.k, sigma=field.sigma, k_saturated=field.k_saturated),
    )


def load_field(base: str | Path, name: str = "field") -> InterpolatedField:
    base = Path(base)
    rows = read_csv(base / f"{name}.csv", FIELD_HEADER)
    meta = read_json(base / f"{name}.json")
    if "k" not in meta:
        raise DataError(f"{base}/{name}.json has no interpolation parameters")
    return InterpolatedField(
        anchors=rows[:, :2],
        forces=rows[:, 2:],
        k=int(meta["k"]),
        sigma=float(meta["sigma"]),
        kind=meta["kind"],
        Z=float(meta["Z"]),
        flipped=bool(meta["flip_sign"]),
        k_saturated=bool(meta.get("k_saturated", False)),
    )


def save_grid(path: str | Path, grid: FieldGrid) -> None:
    """Grid CSV (x, y, fx, fy, magnitude), x fastest, plus a .json sidecar."""
    path = Path(path)
    pts = grid.points
    vec = grid.vectors.reshape(-1, 2)
    mag = grid.magnitudes.reshape(-1, 1)
    write_csv(path, GRID_HEADER, np.hstack([pts, vec, mag]))
    write_json(
        path.with_suffix(".json"),
        {"bbox": [float(v) for v in grid.bbox], "nx": grid.nx, "ny": grid.ny},
    )


def load_grid(path: str | Path) -> FieldGrid:
    path = Path(path)
    rows = read_csv(path, GRID_HEADER)
    meta = read_json(path.with_suffix(".json"))
    nx, ny = int(meta["nx"]), int(meta["ny"])
    if len(rows) != nx * ny:
        raise DataError(f"{path}: {len(rows)} rows != nx*ny = {nx * ny}")
    return FieldGrid(
        bbox=tuple(float(v) for v in meta["bbox"]),
        nx=nx,
        ny=ny,
        vectors=rows[:, 2:4].reshape(ny, nx, 2),
    )


def save_flow_result(base: str | Path, result: FlowResult) -> None:
    """initial.csv, final.csv, snapshot_<t>.csv, flow.json."""
    base = Path(base)
    save_embedding(base / "initial.csv", result.initial)
    save_embedding(base / "final.csv", result.final)
    for t, Y in result.snapshots:
        save_embedding(base / f"snapshot_{t:08d}.csv", Y)
    write_json(
        base / "flow.json",
        {
            "iterations": result.iterations,
            "field_kind": result.field_kind,
            "underflow_count": result.underflow_count,
            "snapshot_iterations": [int(t) for t, _ in result.snapshots],
        },
    )


def load_flow_result(base: str | Path) -> FlowResult:
    base = Path(base)
    meta = read_json(base / "flow.json")
    snapshots = [
        (int(t), load_embedding(base / f"snapshot_{int(t):08d}.csv"))
        for t in meta["snapshot_iterations"]
    ]
    return FlowResult(
        initial=load_embedding(base / "initial.csv"),
        final=load_embedding(base / "final.csv"),
        snapshots=snapshots,
        iterations=int(meta["iterations"]),
        field_kind=meta["field_kind"],
        underflow_count=int(meta["underflow_count"]),
    )


def save_sinks(path: str | Path, clustering: SinkClustering, composition=None) -> None:
    payload = {
        "epsilon": clustering.epsilon,
        "labels": clustering.labels.tolist(),
        "sizes": clustering.sizes.tolist(),
        "centers": clustering.centers.tolist(),
        "non_converged": clustering.non_converged.tolist(),
    }
    if composition is not None:
        payload["composition"] = composition.to_dict()
    write_json(path, payload)


def save_pgm(path: str | Path, image: np.ndarray) -> None:
    """Plain-text PGM (P2), values 0..255, one image row per line."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise DataError(f"image must be 2-d, got shape {image.shape}")
    if image.dtype != np.uint8:
        if image.min() < 0 or image.max() > 255:
            raise DataError("image values must lie in [0, 255]")
        image = image.astype(np.uint8)
    h, w = image.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"P2\n{w} {h}\n255\n")
        for row in image:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def save_trace(path: str | Path, records) -> None:
    rows = np.array([[r.iteration, r.cost, r.grad_max_norm] for r in records])
    if len(records) == 0:
        rows = np.empty((0, 3))
    write_csv(path, TRACE_HEADER, rows)


def atomic_dir(target: str | Path):
    """Context manager: build artifacts in a temp dir, rename into place on success."""
    return _AtomicDir(Path(target))


class _AtomicDir:
    def __init__(self, target: Path):
        self.target = target
        self.tmp = target.with_name(target.name + ".tmp")

    def __enter__(self) -> Path:
        if self.target.exists():
            raise DataError(f"output directory {self.target} already exists")
        if self.tmp.exists():
            import shutil

            shutil.rmtree(self.tmp)
        self.tmp.mkdir(parents=True)
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            os.rename(self.tmp, self.target)
        else:
            import shutil

            shutil.rmtree(self.tmp, ignore_errors=True)
        return False

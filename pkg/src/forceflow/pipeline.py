"""End-to-end runs: data -> embedding -> field -> flow -> sinks -> report.

Every run writes a self-contained artifact directory (created atomically:
built under a temp name, renamed into place on success):

    manifest.json        the full configuration; rerunning it reproduces
                         every CSV in the directory byte for byte
    points.csv ...       the dataset (synthetic sources only, see below)
    embedding.csv        equilibrium t-SNE positions
    trace.csv            optimizer cost / gradient-norm trace
    field.csv/.json      force samples plus interpolation parameters
    grid.csv/.json       field sampled on a regular grid
    flow/                initial, snapshots, final positions
    sinks.json           sink sizes, centers, composition
    cluster_means.csv    input-space mean of each sink's members
    means_pgm/           the means as PGM images when an image shape is set
    report.json          derived numbers: sigma, k, epsilon, accuracies, ...
    figures/             deterministic SVGs

File-backed sources (CSV directory or IDX pair) are referenced by path in
the manifest rather than copied.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import fileio
from .affinity import compute_affinities
from .data import Dataset, SyntheticGaussianSpec, gen_gaussians, load_idx
from .embedder import TsneConfig, pca_init, random_init, run_tsne
from .errors import ConfigError, ForceflowError, PipelineError
from .evaluation import KMEANS_RESTARTS, evaluate_embeddings
from .flow import default_epsilon, detect_sinks, flow, cluster_means, label_composition
from .forcefield import extract
from .interpolator import MeanField, build_field, sample_grid
from .figures import quiver_svg, scatter_svg, trajectory_svg

GRID_DEFAULT_RES = 50
GRID_PAD_FRACTION = 0.05
MANIFEST_FORMAT = 1


@dataclass
class ExperimentConfig:
    """Everything a pipeline run needs; serializes to/from manifest JSON."""

    # exactly one data source
    synthetic: SyntheticGaussianSpec | None = None
    csv_dir: str | None = None
    idx_images: str | None = None
    idx_labels: str | None = None

    class_filter: list[int] | None = None
    per_class_limit: int | None = None
    data_seed: int = 0

    tsne: TsneConfig = dc_field(default_factory=TsneConfig)

    field_kind: str = "modified_attraction"
    flip_sign: bool | None = None
    field_k: int | None = None
    field_sigma: float | None = None

    flow_T: int = 1000
    checkpoints: list[int] | None = None
    epsilon: float | None = None

    eval_k: int | None = None  # None: one cluster per class when labels exist
    eval_seed: int = 0
    eval_restarts: int = KMEANS_RESTARTS

    grid_bbox: tuple[float, float, float, float] | None = None
    grid_nx: int = GRID_DEFAULT_RES
    grid_ny: int = GRID_DEFAULT_RES

    image_shape: tuple[int, int] | None = None
    figures: bool = True

    def __post_init__(self):
        sources = [
            self.synthetic is not None,
            self.csv_dir is not None,
            self.idx_images is not None,
        ]
        if sum(sources) != 1:
            raise ConfigError("exactly one of synthetic, csv_dir, idx_images required")
        if (self.idx_images is None) != (self.idx_labels is None):
            raise ConfigError("idx_images and idx_labels must be given together")
        if self.flow_T < 1:
            raise ConfigError(f"flow_T must be >= 1, got {self.flow_T}")

    def to_dict(self) -> dict:
        return {
            "manifest_format": MANIFEST_FORMAT,
            "synthetic": None if self.synthetic is None else self.synthetic.to_dict(),
            "csv_dir": self.csv_dir,
            "idx_images": self.idx_images,
            "idx_labels": self.idx_labels,
            "class_filter": self.class_filter,
            "per_class_limit": self.per_class_limit,
            "data_seed": self.data_seed,
            "tsne": self.tsne.to_dict(),
            "field_kind": self.field_kind,
            "flip_sign": self.flip_sign,
            "field_k": self.field_k,
            "field_sigma": self.field_sigma,
            "flow_T": self.flow_T,
            "checkpoints": self.checkpoints,
            "epsilon": self.epsilon,
            "eval_k": self.eval_k,
            "eval_seed": self.eval_seed,
            "eval_restarts": self.eval_restarts,
            "grid_bbox": None if self.grid_bbox is None else list(self.grid_bbox),
            "grid_nx": self.grid_nx,
            "grid_ny": self.grid_ny,
            "image_shape": None if self.image_shape is None else list(self.image_shape),
            "figures": self.figures,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        fmt = d.pop("manifest_format", MANIFEST_FORMAT)
        if fmt != MANIFEST_FORMAT:
            raise ConfigError(f"unsupported manifest format {fmt}")
        if d.get("synthetic") is not None:
            d["synthetic"] = SyntheticGaussianSpec.from_dict(d["synthetic"])
        d["tsne"] = TsneConfig.from_dict(d["tsne"])
        if d.get("grid_bbox") is not None:
            d["grid_bbox"] = tuple(d["grid_bbox"])
        if d.get("image_shape") is not None:
            d["image_shape"] = tuple(d["image_shape"])
        return cls(**d)


def _load_data(config: ExperimentConfig) -> Dataset:
    if config.synthetic is not None:
        data = gen_gaussians(config.synthetic, config.data_seed)
    elif config.csv_dir is not None:
        points, labels = fileio.load_dataset(config.csv_dir)
        data = Dataset(points=points, labels=labels)
    else:
        data = load_idx(config.idx_images, config.idx_labels)
    if config.class_filter is not None:
        data = data.filter_classes(config.class_filter, config.per_class_limit)
    elif config.per_class_limit is not None:
        if data.labels is None:
            raise ConfigError("per_class_limit needs labels")
        data = data.filter_classes(np.unique(data.labels), config.per_class_limit)
    return data


def _stage(name: str):
    """Decorator-free stage guard: re-raise package errors with the stage name."""

    class _Guard:
        def __enter__(self):
            return None

        def __exit__(self, exc_type, exc, tb):
            if exc_type is not None and issubclass(exc_type, ForceflowError):
                raise PipelineError(name, str(exc)) from exc
            return False

    return _Guard()


def _grid_bbox(Y: np.ndarray) -> tuple[float, float, float, float]:
    xmin, ymin = Y.min(axis=0)
    xmax, ymax = Y.max(axis=0)
    pad_x = GRID_PAD_FRACTION * max(xmax - xmin, 1e-9)
    pad_y = GRID_PAD_FRACTION * max(ymax - ymin, 1e-9)
    return (float(xmin - pad_x), float(xmax + pad_x),
            float(ymin - pad_y), float(ymax + pad_y))


def run_pipeline(config: ExperimentConfig, out_dir: str | Path) -> Path:
    """Run the whole chain and write the artifact directory; returns its path."""
    t_start = time.perf_counter()
    out_dir = Path(out_dir)
    with fileio.atomic_dir(out_dir) as tmp:
        fileio.write_json(tmp / "manifest.json", config.to_dict())

        with _stage("data"):
            data = _load_data(config)
            if config.synthetic is not None:
                fileio.save_dataset(tmp, data.points, data.labels)

        with _stage("affinity"):
            aff = compute_affinities(data, config.tsne.perplexity)

        with _stage("embed"):
            if config.tsne.init == "pca":
                init = pca_init(data, config.tsne.seed)
            else:
                init = random_init(data.n, config.tsne.seed)
            trace: list = []
            emb = run_tsne(aff, init, config.tsne, trace)
            fileio.save_embedding(tmp / "embedding.csv", emb.Y)
            fileio.save_trace(tmp / "trace.csv", trace)

        with _stage("forces"):
            samples = extract(config.field_kind, aff, emb, config.flip_sign)

        with _stage("field"):
            fld = build_field(samples, k=config.field_k, sigma=config.field_sigma)
            fileio.save_field(tmp, fld)

        with _stage("grid"):
            bbox = config.grid_bbox or _grid_bbox(emb.Y)
            grid = sample_grid(fld, bbox, config.grid_nx, config.grid_ny)
            fileio.save_grid(tmp / "grid.csv", grid)

        with _stage("flow"):
            result = flow(emb.Y, fld, config.flow_T, config.checkpoints)
            flow_dir = tmp / "flow"
            flow_dir.mkdir()
            fileio.save_flow_result(flow_dir, result)

        with _stage("sinks"):
            epsilon = config.epsilon if config.epsilon is not None else default_epsilon(emb.Y)
            sinks = detect_sinks(result.final, epsilon)
            composition = None
            if data.labels is not None:
                composition = label_composition(sinks, data.labels)
            fileio.save_sinks(tmp / "sinks.json", sinks, composition)
            means = cluster_means(data.points, sinks)
            fileio.write_csv(
                tmp / "cluster_means.csv",
                [f"f{i}" for i in range(means.shape[1])],
                means,
            )
            if config.image_shape is not None:
                h, w = config.image_shape
                if h * w != data.dim:
                    raise ConfigError(
                        f"image shape {config.image_shape} does not match dim {data.dim}"
                    )
                pgm_dir = tmp / "means_pgm"
                pgm_dir.mkdir()
                for lbl in range(sinks.n_sinks):
                    img = np.clip(means[lbl].reshape(h, w) * 255.0, 0, 255)
                    fileio.save_pgm(pgm_dir / f"mean_{lbl:03d}.pgm", img.astype(np.uint8))

        report = {
            "n": data.n,
            "dim": data.dim,
            "tsne_iterations": emb.iterations_run,
            "tsne_converged": emb.converged,
            "tsne_cost": emb.cost,
            "Z": emb.Z,
            "field_kind": fld.kind,
            "flip_sign": fld.flipped,
            "k": fld.k,
            "sigma": fld.sigma,
            "k_saturated": fld.k_saturated,
            "epsilon": epsilon,
            "flow_T": result.iterations,
            "flow_underflow_count": result.underflow_count,
            "n_sinks": sinks.n_sinks,
            "sink_sizes": sinks.sizes.tolist(),
            "non_converged_sinks": int(sinks.non_converged.sum()),
        }
        if composition is not None:
            report["composition"] = composition.to_dict()

        if data.labels is not None:
            with _stage("eval"):
                k = config.eval_k or len(np.unique(data.labels))
                ev = evaluate_embeddings(
                    emb.Y, result.final, data.labels, k,
                    seed=config.eval_seed, restarts=config.eval_restarts,
                )
                report["eval"] = ev.to_dict()

        if config.figures:
            with _stage("figures"):
                fig_dir = tmp / "figures"
                fig_dir.mkdir()
                scatter_svg(fig_dir / "embedding.svg", emb.Y, data.labels, "equilibrium embedding")
                scatter_svg(fig_dir / "flowed.svg", result.final, data.labels,
                            f"after {result.iterations} flow iterations")
                scatter_svg(fig_dir / "sinks.svg", result.final, sinks.labels, "sink membership")
                quiver_svg(fig_dir / "field.svg", grid, f"{fld.kind} field")
                trajectory_svg(fig_dir / "trajectory.svg", result.snapshots)

        report["runtime_seconds"] = time.perf_counter() - t_start
        fileio.write_json(tmp / "report.json", report)
    return out_dir


def run_from_manifest(manifest_path: str | Path, out_dir: str | Path) -> Path:
    """Re-run a recorded configuration; CSV outputs are byte-identical."""
    config = ExperimentConfig.from_dict(fileio.read_json(manifest_path))
    return run_pipeline(config, out_dir)


def average_runs(
    configs: list[ExperimentConfig],
    out_dir: str | Path,
    flow_T: int | None = None,
    epsilon: float | None = None,
    grid_bbox: tuple[float, float, float, float] | None = None,
) -> Path:
    """Run each member config, average their fields, flow members through the mean.

    All members must load the identical dataset (same points, bitwise); the
    member runs land in members/NNN/ subdirectories. Each member's equilibrium
    points are then flowed through the mean field, and the per-member sink
    counts under its own field and under the mean field are reported side by
    side. No alignment is applied to member embeddings before averaging.
    """
    if len(configs) < 2:
        raise ConfigError(f"averaging needs >= 2 member runs, got {len(configs)}")
    out_dir = Path(out_dir)
    with fileio.atomic_dir(out_dir) as tmp:
        datasets = [_load_data(c) for c in configs]
        ref = datasets[0].points
        for i, d in enumerate(datasets[1:], start=1):
            if d.points.shape != ref.shape or not np.array_equal(d.points, ref):
                raise ConfigError(f"member {i} dataset differs from member 0")

        members_dir = tmp / "members"
        members_dir.mkdir()
        fields = []
        member_reports = []
        for i, c in enumerate(configs):
            member_out = members_dir / f"{i:03d}"
            run_pipeline(c, member_out)
            fields.append(fileio.load_field(member_out))
            member_reports.append(fileio.read_json(member_out / "report.json"))

        mean = MeanField(members=fields)
        T = flow_T if flow_T is not None else configs[0].flow_T

        rows = []
        for i, c in enumerate(configs):
            Y0 = fileio.load_embedding(members_dir / f"{i:03d}" / "embedding.csv")
            eps = epsilon if epsilon is not None else default_epsilon(Y0)
            result = flow(Y0, mean, T, configs[0].checkpoints)
            sinks = detect_sinks(result.final, eps)
            flow_dir = tmp / f"meanflow_{i:03d}"
            flow_dir.mkdir()
            fileio.save_flow_result(flow_dir, result)
            fileio.save_sinks(flow_dir / "sinks.json", sinks)
            rows.append(
                {
                    "member": i,
                    "own_field_sinks": member_reports[i]["n_sinks"],
                    "mean_field_sinks": sinks.n_sinks,
                    "epsilon": eps,
                }
            )

        if grid_bbox is None:
            Y0 = fileio.load_embedding(members_dir / "000" / "embedding.csv")
            grid_bbox = _grid_bbox(Y0)
        grid = sample_grid(mean, grid_bbox, configs[0].grid_nx, configs[0].grid_ny)
        fileio.save_grid(tmp / "mean_grid.csv", grid)
        if configs[0].figures:
            quiver_svg(tmp / "mean_field.svg", grid, "mean field")

        fileio.write_json(
            tmp / "manifest.json",
            {
                "manifest_format": MANIFEST_FORMAT,
                "average": {
                    "members": [c.to_dict() for c in configs],
                    "flow_T": T,
                    "epsilon": epsilon,
                    "grid_bbox": list(grid_bbox),
                },
            },
        )
        fileio.write_json(tmp / "report.json", {"members": rows})
    return out_dir

"""Command line entry points.

Two ways to work: ``pipeline`` runs everything into one artifact directory;
the stage commands (``embed``, ``forces``, ``flow``, ``sinks``, ``eval``)
build up the same directory incrementally so intermediate products can be
inspected or swapped. ``average`` runs several trials and averages their
fields. Artifact directories carry a manifest.json that reproduces the run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .affinity import compute_affinities
from .data import separated_gaussians_spec
from .embedder import TsneConfig, pca_init, random_init, run_tsne, output_affinities
from .embedder import Embedding
from .errors import ConfigError, ForceflowError
from .evaluation import evaluate_embeddings
from .flow import default_epsilon, detect_sinks, flow, cluster_means, label_composition
from .forcefield import FIELD_KINDS, extract
from .interpolator import build_field
from .pipeline import ExperimentConfig, average_runs, run_pipeline, run_from_manifest


def _add_source_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data source (choose one)")
    g.add_argument("--two-gaussians", type=float, metavar="SEP",
                   help="two isotropic Gaussian clusters separated by SEP along axis 0")
    g.add_argument("--single-gaussian", action="store_true",
                   help="one isotropic Gaussian cluster at the origin")
    g.add_argument("--csv-dir", help="directory holding points.csv (+ labels.csv)")
    g.add_argument("--idx-images", help="IDX3 image file (gzip ok)")
    g.add_argument("--idx-labels", help="IDX1 label file (gzip ok)")
    p.add_argument("--points-per-cluster", type=int, default=500)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--covariance", type=float, default=1.0)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--classes", type=int, nargs="+", default=None,
                   help="keep only these label classes")
    p.add_argument("--per-class-limit", type=int, default=None,
                   help="keep the first N rows of each class")


def _add_tsne_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--max-iters", type=int, default=750)
    p.add_argument("--early-iters", type=int, default=250,
                   help="length of the early exaggeration phase")
    p.add_argument("--init", choices=["pca", "random"], default="pca")
    p.add_argument("--seed", type=int, default=0, help="seed for random init")


def _add_field_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=list(FIELD_KINDS), default="modified_attraction")
    sign = p.add_mutually_exclusive_group()
    sign.add_argument("--flip-sign", dest="flip_sign", action="store_true", default=None,
                      help="negate the sampled forces (default for attraction kinds)")
    sign.add_argument("--no-flip-sign", dest="flip_sign", action="store_false",
                      help="keep the literal formula direction")
    p.add_argument("--field-k", type=int, default=None)
    p.add_argument("--field-sigma", type=float, default=None)


def _source_config(args) -> ExperimentConfig:
    synthetic = None
    chosen = sum(
        [
            args.two_gaussians is not None,
            bool(args.single_gaussian),
            args.csv_dir is not None,
            args.idx_images is not None,
        ]
    )
    if chosen != 1:
        raise ConfigError("choose exactly one data source")
    if args.two_gaussians is not None:
        synthetic = separated_gaussians_spec(
            separation=args.two_gaussians,
            n_clusters=2,
            count=args.points_per_cluster,
            dimension=args.dim,
            covariance=args.covariance,
        )
    elif args.single_gaussian:
        synthetic = separated_gaussians_spec(
            separation=0.0,
            n_clusters=1,
            count=args.points_per_cluster,
            dimension=args.dim,
            covariance=args.covariance,
        )
    tsne = TsneConfig(
        perplexity=args.perplexity,
        max_iters=args.max_iters,
        early_exaggeration_iters=args.early_iters,
        momentum_switch_iter=args.early_iters,
        init=args.init,
        seed=args.seed,
    )
    return ExperimentConfig(
        synthetic=synthetic,
        csv_dir=args.csv_dir,
        idx_images=args.idx_images,
        idx_labels=args.idx_labels,
        class_filter=args.classes,
        per_class_limit=args.per_class_limit,
        data_seed=args.data_seed,
        tsne=tsne,
        field_kind=getattr(args, "kind", "modified_attraction"),
        flip_sign=getattr(args, "flip_sign", None),
        field_k=getattr(args, "field_k", None),
        field_sigma=getattr(args, "field_sigma", None),
        flow_T=getattr(args, "T", 1000),
        epsilon=getattr(args, "epsilon", None),
        eval_k=getattr(args, "eval_k", None),
        eval_seed=getattr(args, "eval_seed", 0),
        grid_nx=getattr(args, "grid_res", 50),
        grid_ny=getattr(args, "grid_res", 50),
        image_shape=tuple(args.image_shape) if getattr(args, "image_shape", None) else None,
        figures=not getattr(args, "no_figures", False),
    )


def _load_run(run_dir: str) -> tuple[ExperimentConfig, Path]:
    run = Path(run_dir)
    manifest = run / "manifest.json"
    if not manifest.exists():
        raise ConfigError(f"{run} has no manifest.json (run 'embed' first)")
    return ExperimentConfig.from_dict(fileio.read_json(manifest)), run


def _embedding_from_csv(run: Path) -> Embedding:
    Y = fileio.load_embedding(run / "embedding.csv")
    Q, Z = output_affinities(Y)
    return Embedding(Y=Y, Q=Q, Z=Z, cost=float("nan"), iterations_run=-1, converged=True)


def cmd_embed(args) -> int:
    config = _source_config(args)
    out = Path(args.out)
    from .pipeline import _load_data  # shared data-resolution logic

    with fileio.atomic_dir(out) as tmp:
        fileio.write_json(tmp / "manifest.json", config.to_dict())
        data = _load_data(config)
        if config.synthetic is not None:
            fileio.save_dataset(tmp, data.points, data.labels)
        aff = compute_affinities(data, config.tsne.perplexity)
        init = (
            pca_init(data, config.tsne.seed)
            if config.tsne.init == "pca"
            else random_init(data.n, config.tsne.seed)
        )
        trace: list = []
        emb = run_tsne(aff, init, config.tsne, trace)
        fileio.save_embedding(tmp / "embedding.csv", emb.Y)
        fileio.save_trace(tmp / "trace.csv", trace)
        print(f"embedded {data.n} points in {emb.iterations_run} iterations "
              f"(converged={emb.converged}, cost={emb.cost:.6f})")
    print(f"wrote {out}")
    return 0


def cmd_forces(args) -> int:
    config, run = _load_run(args.run)
    from .pipeline import _load_data

    data = _load_data(config)
    aff = compute_affinities(data, config.tsne.perplexity)
    emb = _embedding_from_csv(run)
    samples = extract(args.kind, aff, emb, args.flip_sign)
    fld = build_field(samples, k=args.field_k, sigma=args.field_sigma)
    fileio.save_field(run, fld)
    print(f"sampled {samples.n} {samples.kind} forces "
          f"(flip_sign={samples.flipped}, k={fld.k}, sigma={fld.sigma:.6g})")
    return 0


def cmd_flow(args) -> int:
    _, run = _load_run(args.run)
    fld = fileio.load_field(run)
    Y0 = fileio.load_embedding(run / "embedding.csv")
    result = flow(Y0, fld, args.T, args.checkpoints)
    flow_dir = run / "flow"
    flow_dir.mkdir(exist_ok=True)
    fileio.save_flow_result(flow_dir, result)
    print(f"flowed {len(Y0)} points for {result.iterations} iterations "
          f"({result.underflow_count} underflow queries)")
    return 0


def cmd_sinks(args) -> int:
    config, run = _load_run(args.run)
    Y0 = fileio.load_embedding(run / "embedding.csv")
    final = fileio.load_embedding(run / "flow" / "final.csv")
    epsilon = args.epsilon if args.epsilon is not None else default_epsilon(Y0)
    sinks = detect_sinks(final, epsilon)
    from .pipeline import _load_data

    data = _load_data(config)
    composition = None if data.labels is None else label_composition(sinks, data.labels)
    fileio.save_sinks(run / "sinks.json", sinks, composition)
    means = cluster_means(data.points, sinks)
    fileio.write_csv(run / "cluster_means.csv",
                     [f"f{i}" for i in range(means.shape[1])], means)
    print(f"{sinks.n_sinks} sinks at epsilon={epsilon:.6g}; sizes {sinks.sizes.tolist()}")
    if composition is not None:
        print(f"purity {composition.purity:.4f} "
              f"({composition.total_misclassified} misclassified)")
    return 0


def cmd_eval(args) -> int:
    config, run = _load_run(args.run)
    from .pipeline import _load_data

    data = _load_data(config)
    if data.labels is None:
        raise ConfigError("eval needs a labeled dataset")
    Y0 = fileio.load_embedding(run / "embedding.csv")
    final = fileio.load_embedding(run / "flow" / "final.csv")
    k = args.eval_k or len(np.unique(data.labels))
    report = evaluate_embeddings(Y0, final, data.labels, k,
                                 seed=args.eval_seed)
    fileio.write_json(run / "eval.json", report.to_dict())
    print(f"k-means (k={k}) accuracy: original {report.accuracy_original:.4f}, "
          f"flowed {report.accuracy_flowed:.4f}")
    return 0


def cmd_average(args) -> int:
    base = _source_config(args)
    configs = []
    for t in range(args.trials):
        tsne = TsneConfig(
            perplexity=base.tsne.perplexity,
            max_iters=base.tsne.max_iters,
            early_exaggeration_iters=base.tsne.early_exaggeration_iters,
            momentum_switch_iter=base.tsne.momentum_switch_iter,
            init="random",
            seed=args.seed + t,
        )
        cfg_dict = base.to_dict()
        cfg_dict["tsne"] = tsne.to_dict()
        configs.append(ExperimentConfig.from_dict(cfg_dict))
    out = average_runs(configs, args.out, flow_T=args.T, epsilon=args.epsilon)
    report = fileio.read_json(Path(out) / "report.json")
    for row in report["members"]:
        print(f"member {row['member']}: own-field sinks {row['own_field_sinks']}, "
              f"mean-field sinks {row['mean_field_sinks']}")
    print(f"wrote {out}")
    return 0


def cmd_pipeline(args) -> int:
    if args.manifest is not None:
        out = run_from_manifest(args.manifest, args.out)
    else:
        config = _source_config(args)
        out = run_pipeline(config, args.out)
    report = fileio.read_json(Path(out) / "report.json")
    print(f"{report['n_sinks']} sinks; sizes {report['sink_sizes']}")
    if "eval" in report:
        ev = report["eval"]
        print(f"k-means accuracy: original {ev['accuracy_original']:.4f}, "
              f"flowed {ev['accuracy_flowed']:.4f}")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forceflow",
        description="t-SNE force-field extraction, interpolation, and flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="run t-SNE to equilibrium")
    _add_source_args(p)
    _add_tsne_args(p)
    p.add_argument("--out", required=True, help="artifact directory to create")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("forces", help="sample force vectors at the embedded points")
    p.add_argument("--run", required=True, help="artifact directory from 'embed'")
    _add_field_args(p)
    p.set_defaults(func=cmd_forces)

    p = sub.add_parser("flow", help="advect the points through the frozen field")
    p.add_argument("--run", required=True)
    p.add_argument("--T", type=int, required=True, help="number of flow iterations")
    p.add_argument("--checkpoints", type=int, nargs="+", default=None)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("sinks", help="cluster the flowed points into sinks")
    p.add_argument("--run", required=True)
    p.add_argument("--epsilon", type=float, default=None,
                   help="linkage radius (default: half the embedding's 5-NN scale)")
    p.set_defaults(func=cmd_sinks)

    p = sub.add_parser("eval", help="k-means accuracy before and after the flow")
    p.add_argument("--run", required=True)
    p.add_argument("--eval-k", type=int, default=None)
    p.add_argument("--eval-seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("average", help="average fields over repeated trials")
    _add_source_args(p)
    _add_tsne_args(p)
    _add_field_args(p)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--T", type=int, default=5000)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--grid-res", type=int, default=50)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("pipeline", help="run every stage into one artifact directory")
    _add_source_args(p)
    _add_tsne_args(p)
    _add_field_args(p)
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--eval-k", type=int, default=None)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--grid-res", type=int, default=50)
    p.add_argument("--image-shape", type=int, nargs=2, default=None,
                   metavar=("H", "W"))
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--manifest", default=None,
                   help="rerun a recorded manifest.json instead of new flags")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ForceflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

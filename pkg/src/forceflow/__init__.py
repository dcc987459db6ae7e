"""forceflow: refine t-SNE embeddings by flowing points along interpolated force fields.

The pipeline runs exact t-SNE to equilibrium, samples per-point attraction
forces there, freezes them into a Gaussian-weighted kNN field, flows the
points through that field, and reads subcluster structure off the sinks where
they collect. A graph-Laplacian module provides the spectral counterpart.
"""

from .affinity import AffinityMatrix, compute_affinities
from .data import Dataset, GaussianCluster, SyntheticGaussianSpec, gen_gaussians, load_idx
from .embedder import Embedding, TsneConfig, embed, run_tsne
from .errors import (
    ConfigError,
    DataError,
    DisconnectedGraphError,
    ForceflowError,
    IdxFormatError,
    NumericalError,
    PipelineError,
)
from .evaluation import EvalReport, best_match_accuracy, evaluate_embeddings, kmeans
from .flow import FlowResult, SinkClustering, detect_sinks, flow, label_composition
from .forcefield import DEFAULT_FLIP_SIGN, ForceSampleSet, extract, modified_attraction
from .interpolator import (
    FieldGrid,
    InterpolatedField,
    MeanField,
    build_field,
    interpolate,
    interpolate_many,
    sample_grid,
)
from .pipeline import ExperimentConfig, average_runs, run_pipeline
from .spectral import Graph, eigenmaps, knn_graph, laplacian

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "ConfigError",
    "DEFAULT_FLIP_SIGN",
    "DataError",
    "Dataset",
    "DisconnectedGraphError",
    "EvalReport",
    "Embedding",
    "ExperimentConfig",
    "FieldGrid",
    "FlowResult",
    "ForceSampleSet",
    "ForceflowError",
    "GaussianCluster",
    "Graph",
    "IdxFormatError",
    "InterpolatedField",
    "MeanField",
    "NumericalError",
    "PipelineError",
    "SinkClustering",
    "SyntheticGaussianSpec",
    "TsneConfig",
    "average_runs",
    "best_match_accuracy",
    "build_field",
    "compute_affinities",
    "detect_sinks",
    "eigenmaps",
    "embed",
    "evaluate_embeddings",
    "extract",
    "flow",
    "gen_gaussians",
    "interpolate",
    "interpolate_many",
    "kmeans",
    "knn_graph",
    "label_composition",
    "laplacian",
    "load_idx",
    "modified_attraction",
    "run_pipeline",
    "run_tsne",
    "sample_grid",
]

"""End-to-end artifact runs at toy scale, including the bitwise rerun contract."""

import json
from pathlib import Path

import numpy as np
import pytest

from forceflow import fileio
from forceflow.data import separated_gaussians_spec
from forceflow.embedder import TsneConfig
from forceflow.errors import ConfigError, PipelineError
from forceflow.pipeline import (
    ExperimentConfig,
    average_runs,
    run_from_manifest,
    run_pipeline,
)


def tiny_config(**overrides):
    base = dict(
        synthetic=separated_gaussians_spec(separation=8.0, count=15, dimension=5),
        data_seed=0,
        tsne=TsneConfig(perplexity=8.0, early_exaggeration_iters=50,
                        max_iters=150, momentum_switch_iter=50),
        flow_T=30,
        grid_nx=6,
        grid_ny=6,
        figures=False,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


EXPECTED_FILES = [
    "manifest.json",
    "points.csv",
    "labels.csv",
    "embedding.csv",
    "trace.csv",
    "field.csv",
    "field.json",
    "grid.csv",
    "grid.json",
    "flow/initial.csv",
    "flow/final.csv",
    "flow/flow.json",
    "sinks.json",
    "cluster_means.csv",
    "report.json",
]


class TestRunPipeline:
    def test_artifact_directory_complete(self, tmp_path):
        out = run_pipeline(tiny_config(), tmp_path / "run")
        for rel in EXPECTED_FILES:
            assert (out / rel).exists(), rel
        report = fileio.read_json(out / "report.json")
        assert report["n"] == 30
        assert report["flip_sign"] is True
        assert report["eval"]["k"] == 2
        assert 0.0 <= report["eval"]["accuracy_flowed"] <= 1.0
        assert report["n_sinks"] >= 1
        assert sum(report["sink_sizes"]) == 30

    def test_figures_written_when_enabled(self, tmp_path):
        out = run_pipeline(tiny_config(figures=True), tmp_path / "run")
        for name in ["embedding.svg", "flowed.svg", "sinks.svg", "field.svg",
                     "trajectory.svg"]:
            assert (out / "figures" / name).exists()

    def test_manifest_rerun_is_bitwise_identical(self, tmp_path):
        first = run_pipeline(tiny_config(), tmp_path / "a")
        second = run_from_manifest(first / "manifest.json", tmp_path / "b")
        csvs = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
        assert csvs  # sanity: the comparison is not vacuous
        for rel in csvs:
            assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel

    def test_existing_output_dir_rejected(self, tmp_path):
        (tmp_path / "run").mkdir()
        with pytest.raises(Exception):
            run_pipeline(tiny_config(), tmp_path / "run")

    def test_failed_run_leaves_no_artifact(self, tmp_path):
        config = tiny_config(field_sigma=-1.0)  # rejected at the field stage
        with pytest.raises(PipelineError) as err:
            run_pipeline(config, tmp_path / "run")
        assert err.value.stage == "field"
        assert not (tmp_path / "run").exists()

    def test_image_shape_writes_pgm_means(self, tmp_path):
        config = tiny_config(
            synthetic=separated_gaussians_spec(separation=8.0, count=15, dimension=6),
            image_shape=(2, 3),
        )
        out = run_pipeline(config, tmp_path / "run")
        pgms = list((out / "means_pgm").glob("mean_*.pgm"))
        report = fileio.read_json(out / "report.json")
        assert len(pgms) == report["n_sinks"]

    def test_image_shape_mismatch_fails(self, tmp_path):
        config = tiny_config(image_shape=(2, 4))  # dim is 5
        with pytest.raises(PipelineError):
            run_pipeline(config, tmp_path / "run")

    def test_config_source_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig()  # no source
        with pytest.raises(ConfigError):
            ExperimentConfig(
                synthetic=separated_gaussians_spec(1.0), csv_dir="somewhere"
            )
        with pytest.raises(ConfigError):
            ExperimentConfig(idx_images="im.idx")  # labels missing

    def test_config_round_trips_through_manifest_dict(self):
        config = tiny_config(epsilon=0.25, eval_k=3, checkpoints=[0, 10, 30])
        again = ExperimentConfig.from_dict(
            json.loads(json.dumps(config.to_dict()))
        )
        assert again.to_dict() == config.to_dict()

    def test_csv_source(self, tmp_path, rng):
        src = tmp_path / "src"
        src.mkdir()
        pts = np.vstack([rng.normal(size=(15, 4)), rng.normal(size=(15, 4)) + 7.0])
        labels = np.repeat([0, 1], 15)
        fileio.save_dataset(src, pts, labels)
        config = tiny_config(synthetic=None, csv_dir=str(src))
        out = run_pipeline(config, tmp_path / "run")
        assert fileio.read_json(out / "report.json")["n"] == 30
        # file-backed datasets are referenced, not copied
        assert not (out / "points.csv").exists()


class TestAverageRuns:
    def test_members_and_mean_artifacts(self, tmp_path):
        configs = [
            tiny_config(tsne=TsneConfig(perplexity=8.0, early_exaggeration_iters=40,
                                        max_iters=120, momentum_switch_iter=40,
                                        init="random", seed=s))
            for s in (0, 1, 2)
        ]
        out = average_runs(configs, tmp_path / "avg", flow_T=20)
        for i in range(3):
            assert (out / "members" / f"{i:03d}" / "embedding.csv").exists()
            assert (out / f"meanflow_{i:03d}" / "final.csv").exists()
        report = fileio.read_json(out / "report.json")
        assert len(report["members"]) == 3
        for row in report["members"]:
            assert row["own_field_sinks"] >= 1
            assert row["mean_field_sinks"] >= 1
        assert (out / "mean_grid.csv").exists()

    def test_needs_two_members(self, tmp_path):
        with pytest.raises(ConfigError):
            average_runs([tiny_config()], tmp_path / "avg")

    def test_dataset_mismatch_rejected(self, tmp_path):
        a = tiny_config()
        b = tiny_config(data_seed=99)
        with pytest.raises(ConfigError):
            average_runs([a, b], tmp_path / "avg")
        assert not (tmp_path / "avg").exists()

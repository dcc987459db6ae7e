"""Exact round-trips for every on-disk format and the atomic directory."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forceflow import fileio
from forceflow.embedder import TraceRecord
from forceflow.errors import DataError
from forceflow.flow import FlowResult, detect_sinks, label_composition
from forceflow.forcefield import ForceSampleSet
from forceflow.interpolator import build_field, sample_grid


def sample_set(rng, n=12):
    return ForceSampleSet(
        anchors=rng.normal(size=(n, 2)),
        forces=rng.normal(size=(n, 2)) * 1e-3,
        kind="modified_attraction",
        Z=123.456,
        flipped=True,
    )


class TestCsv:
    def test_write_read_exact(self, tmp_path, rng):
        rows = rng.normal(size=(20, 3)) * np.array([1e-12, 1.0, 1e15])
        path = tmp_path / "t.csv"
        fileio.write_csv(path, ["a", "b", "c"], rows)
        back = fileio.read_csv(path, ["a", "b", "c"])
        assert np.array_equal(back, rows)  # bitwise, thanks to repr floats

    @settings(max_examples=30, deadline=None)
    @given(
        values=st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            min_size=2, max_size=20,
        )
    )
    def test_round_trip_any_finite_floats(self, values):
        import tempfile
        from pathlib import Path

        rows = np.array(values, dtype=np.float64).reshape(-1, 1)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "h.csv"
            fileio.write_csv(path, ["v"], rows)
            assert np.array_equal(fileio.read_csv(path, ["v"]), rows)

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "t.csv"
        fileio.write_csv(path, ["a"], np.zeros((2, 1)))
        with pytest.raises(DataError):
            fileio.read_csv(path, ["b"])

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,oops\n")
        with pytest.raises(DataError):
            fileio.read_csv(path)

    def test_byte_identical_rewrite(self, tmp_path, rng):
        rows = rng.normal(size=(10, 2))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        fileio.write_csv(p1, ["x", "y"], rows)
        fileio.write_csv(p2, ["x", "y"], fileio.read_csv(p1, ["x", "y"]))
        assert p1.read_bytes() == p2.read_bytes()


class TestFieldFiles:
    def test_force_samples_round_trip(self, tmp_path, rng):
        s = sample_set(rng)
        fileio.save_force_samples(tmp_path, s)
        back = fileio.load_force_samples(tmp_path)
        assert np.array_equal(back.anchors, s.anchors)
        assert np.array_equal(back.forces, s.forces)
        assert back.kind == s.kind and back.Z == s.Z and back.flipped == s.flipped

    def test_field_round_trip(self, tmp_path, rng):
        f = build_field(sample_set(rng), k=4, sigma=0.75)
        fileio.save_field(tmp_path, f)
        back = fileio.load_field(tmp_path)
        assert np.array_equal(back.anchors, f.anchors)
        assert np.array_equal(back.forces, f.forces)
        assert back.k == 4 and back.sigma == 0.75
        assert back.kind == f.kind and back.Z == f.Z and back.flipped == f.flipped

    def test_samples_file_rejected_as_field(self, tmp_path, rng):
        fileio.save_force_samples(tmp_path, sample_set(rng))
        with pytest.raises(DataError):
            fileio.load_field(tmp_path)


class TestGrid:
    def test_round_trip(self, tmp_path, rng):
        f = build_field(sample_set(rng), k=3, sigma=1.0)
        grid = sample_grid(f, (-2.0, 2.0, -1.0, 3.0), nx=5, ny=4)
        fileio.save_grid(tmp_path / "g.csv", grid)
        back = fileio.load_grid(tmp_path / "g.csv")
        assert back.bbox == grid.bbox
        assert back.nx == grid.nx and back.ny == grid.ny
        assert np.array_equal(back.vectors, grid.vectors)

    def test_csv_columns(self, tmp_path, rng):
        f = build_field(sample_set(rng), k=3, sigma=1.0)
        grid = sample_grid(f, (-1.0, 1.0, -1.0, 1.0), nx=3, ny=3)
        fileio.save_grid(tmp_path / "g.csv", grid)
        header = (tmp_path / "g.csv").read_text().splitlines()[0]
        assert header == "x,y,fx,fy,magnitude"


class TestFlowResult:
    def test_round_trip(self, tmp_path, rng):
        snaps = [(0, rng.normal(size=(6, 2))), (3, rng.normal(size=(6, 2))),
                 (9, rng.normal(size=(6, 2)))]
        result = FlowResult(
            initial=snaps[0][1],
            final=snaps[-1][1],
            snapshots=snaps,
            iterations=9,
            field_kind="modified_attraction",
            underflow_count=2,
        )
        fileio.save_flow_result(tmp_path, result)
        back = fileio.load_flow_result(tmp_path)
        assert back.iterations == 9
        assert back.field_kind == "modified_attraction"
        assert back.underflow_count == 2
        assert [t for t, _ in back.snapshots] == [0, 3, 9]
        for (_, a), (_, b) in zip(back.snapshots, snaps):
            assert np.array_equal(a, b)
        assert np.array_equal(back.final, result.final)


class TestSinksJson:
    def test_contents(self, tmp_path):
        pts = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]])
        sinks = detect_sinks(pts, epsilon=0.5)
        comp = label_composition(sinks, np.array([1, 1, 5]))
        fileio.save_sinks(tmp_path / "s.json", sinks, comp)
        back = fileio.read_json(tmp_path / "s.json")
        assert back["sizes"] == [2, 1]
        assert back["epsilon"] == 0.5
        assert back["composition"]["purity"] == 1.0


class TestPgm:
    def test_plain_text_format(self, tmp_path):
        img = np.array([[0, 128], [255, 64]], dtype=np.uint8)
        fileio.save_pgm(tmp_path / "m.pgm", img)
        text = (tmp_path / "m.pgm").read_text()
        assert text == "P2\n2 2\n255\n0 128\n255 64\n"

    def test_range_checked(self, tmp_path):
        with pytest.raises(DataError):
            fileio.save_pgm(tmp_path / "m.pgm", np.array([[300.0]]))


class TestTrace:
    def test_round_trip(self, tmp_path):
        records = [TraceRecord(1, 2.5, 0.1), TraceRecord(2, 2.25, 0.05)]
        fileio.save_trace(tmp_path / "t.csv", records)
        back = fileio.read_csv(tmp_path / "t.csv", fileio.TRACE_HEADER)
        assert back.shape == (2, 3)
        assert back[0].tolist() == [1.0, 2.5, 0.1]


class TestAtomicDir:
    def test_success_renames(self, tmp_path):
        target = tmp_path / "out"
        with fileio.atomic_dir(target) as tmp:
            (tmp / "x.txt").write_text("done")
            assert not target.exists()
        assert (target / "x.txt").read_text() == "done"
        assert not (tmp_path / "out.tmp").exists()

    def test_failure_leaves_nothing(self, tmp_path):
        target = tmp_path / "out"
        with pytest.raises(RuntimeError):
            with fileio.atomic_dir(target) as tmp:
                (tmp / "x.txt").write_text("partial")
                raise RuntimeError("boom")
        assert not target.exists()
        assert not (tmp_path / "out.tmp").exists()

    def test_existing_target_rejected(self, tmp_path):
        target = tmp_path / "out"
        target.mkdir()
        with pytest.raises(DataError):
            with fileio.atomic_dir(target):
                pass

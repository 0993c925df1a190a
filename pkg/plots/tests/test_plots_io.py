"""Parser tests against the committed golden artifacts plus malformed inputs."""

from __future__ import annotations

import numpy as np
import pytest

from snapshot_builder import build_snapshot_bytes
from pebmplots.io import (
    ArtifactError,
    DIFFERENCE_COLUMNS,
    ENERGY_COLUMNS,
    RESIDUAL_COLUMNS,
    read_difference_trace,
    read_energy_trace,
    read_orbit_residuals,
    read_snapshot,
)


class TestGoldenTraces:
    def test_energy_trace(self, energy_csv):
        frame = read_energy_trace(energy_csv)
        assert frame.columns == ENERGY_COLUMNS
        assert len(frame) == 51
        # spot values must round-trip bitwise from the committed file
        assert frame["t"][0] == 0.0
        assert frame["t"][-1] == 0.10000000000000007
        assert frame["v_sq"][0] == 0.002991182123752314
        assert frame["div_max"][0] == 1.905559968234386e-16
        assert np.all(np.diff(frame["t"]) > 0)
        for name in ENERGY_COLUMNS:
            assert np.all(np.isfinite(frame[name]))

    def test_difference_trace(self, difference_csv):
        frame = read_difference_trace(difference_csv)
        assert frame.columns == DIFFERENCE_COLUMNS
        assert len(frame) == 21
        assert frame["sigma_v_sq"][0] == 9.102286925145035e-13
        assert frame["g_weight"][0] == 0.5386513441408639
        for name in ("sigma_v_sq", "sigma_T_sq", "sigma_rho_sq", "sigma_grad_sq"):
            assert np.all(frame[name] >= 0.0)

    def test_orbit_residuals(self, residuals_csv):
        frame = read_orbit_residuals(residuals_csv)
        assert frame.columns == RESIDUAL_COLUMNS
        assert len(frame) == 24
        assert np.array_equal(frame["iteration"], np.arange(1, 25))
        assert frame["residual"][0] == 0.12358480000219817
        assert frame["residual"][-1] == 1.8554243833315897e-10
        assert np.all(frame["residual"] > 0.0)
        # the table comes from a converged solve
        assert frame["residual"][-1] < 1e-9

    def test_unknown_column_lookup(self, energy_csv):
        frame = read_energy_trace(energy_csv)
        with pytest.raises(ArtifactError, match="no column"):
            frame["no_such_column"]


class TestGoldenSnapshot:
    def test_shapes_and_time(self, snapshot_file):
        snap = read_snapshot(snapshot_file)
        assert (snap.nx, snap.ny, snap.nz) == (8, 8, 4)
        assert snap.v.shape == (2, 8, 8, 4)
        assert snap.T.shape == (8, 8, 4)
        assert snap.rho.shape == (8, 8)
        assert snap.t == pytest.approx(0.1, abs=1e-12)
        for field in (snap.v, snap.T, snap.rho):
            assert np.all(np.isfinite(field))

    def test_builder_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        v = rng.normal(size=(2, 4, 4, 3))
        T = rng.normal(size=(4, 4, 3))
        rho = rng.normal(size=(4, 4))
        path = tmp_path / "made.snap"
        path.write_bytes(build_snapshot_bytes(4, 4, 3, 2.5, v, T, rho))
        snap = read_snapshot(path)
        assert snap.t == 2.5
        np.testing.assert_array_equal(snap.v, v)
        np.testing.assert_array_equal(snap.T, T)
        np.testing.assert_array_equal(snap.rho, rho)


class TestMalformedTraces:
    def test_wrong_header(self, difference_csv):
        with pytest.raises(ArtifactError, match="unexpected columns"):
            read_energy_trace(difference_csv)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ArtifactError, match="empty file"):
            read_difference_trace(path)

    def test_short_row(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text(",".join(DIFFERENCE_COLUMNS) + "\n0.0,1.0,2.0\n")
        with pytest.raises(ArtifactError, match="line 2 has 3 fields"):
            read_difference_trace(path)

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "text.csv"
        path.write_text(
            ",".join(RESIDUAL_COLUMNS) + "\n1,not-a-number,0.5\n"
        )
        with pytest.raises(ArtifactError, match="non-numeric"):
            read_orbit_residuals(path)

    def test_fractional_iteration(self, tmp_path):
        path = tmp_path / "frac.csv"
        path.write_text(",".join(RESIDUAL_COLUMNS) + "\n1.5,0.1,0.5\n")
        with pytest.raises(ArtifactError, match="non-integer"):
            read_orbit_residuals(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_energy_trace(tmp_path / "nowhere.csv")


class TestMalformedSnapshots:
    def test_truncated_header(self, tmp_path, snapshot_file):
        path = tmp_path / "trunc.snap"
        path.write_bytes(snapshot_file.read_bytes()[:10])
        with pytest.raises(ArtifactError, match="truncated"):
            read_snapshot(path)

    def test_bad_magic(self, tmp_path, snapshot_file):
        raw = bytearray(snapshot_file.read_bytes())
        raw[:4] = b"XXXX"
        path = tmp_path / "magic.snap"
        path.write_bytes(bytes(raw))
        with pytest.raises(ArtifactError, match="magic"):
            read_snapshot(path)

    def test_bad_version(self, tmp_path, snapshot_file):
        raw = bytearray(snapshot_file.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path = tmp_path / "ver.snap"
        path.write_bytes(bytes(raw))
        with pytest.raises(ArtifactError, match="version 99"):
            read_snapshot(path)

    def test_wrong_size(self, tmp_path, snapshot_file):
        path = tmp_path / "size.snap"
        path.write_bytes(snapshot_file.read_bytes()[:-4])
        with pytest.raises(ArtifactError, match="wrong size"):
            read_snapshot(path)

    def test_corrupt_payload(self, tmp_path, snapshot_file):
        raw = bytearray(snapshot_file.read_bytes())
        raw[100] ^= 0xFF
        path = tmp_path / "flip.snap"
        path.write_bytes(bytes(raw))
        with pytest.raises(ArtifactError, match="checksum"):
            read_snapshot(path)

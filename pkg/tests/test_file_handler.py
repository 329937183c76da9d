import numpy as np
import pandas as pd
import pytest

import config
from models.darcy_solver import leray_project_buoyancy
from models.exceptions import SnapshotFormatError
from models.temperature_dynamics import SystemState
from models.twin_experiment import ErrorSeries
from utils.file_handler import FileHandler, load_field, write_series


@pytest.fixture
def handler():
    return FileHandler()


@pytest.fixture
def series():
    t = np.linspace(0.0, 1.0, 11)
    xi = np.exp(-3.0 * t) / 3.0
    rows = pd.DataFrame({"t": t, "xi_l2": xi, "xi_h1": 4 * xi, "w_l2": 50 * xi, "theta_max": 0.7, "eta_max": 0.6},
                        columns=config.CSV_COLUMNS)
    return ErrorSeries(rows, {"config_hash": "ab" * 32, "c0": 0.123456789012345, "mu_condition": True})


class TestSeries:

    def test_write_and_read(self, handler, series, tmp_path):
        path = write_series(series, tmp_path / "out" / "run.csv")
        rows, metadata = handler.read_series(path)
        assert np.array_equal(rows.to_numpy(), series.rows.to_numpy())
        assert metadata == {"config_hash": "ab" * 32, "c0": "0.123456789012345", "mu_condition": "True"}

    def test_header_line(self, series, tmp_path):
        path = write_series(series, tmp_path / "run.csv")
        assert path.read_text().splitlines()[0] == ",".join(config.CSV_COLUMNS)

    def test_wrong_columns(self, handler, tmp_path):
        path = tmp_path / "other.csv"
        pd.DataFrame({"t": [0.0], "error": [1.0]}).to_csv(path, index=False)
        with pytest.raises(SnapshotFormatError):
            handler.read_series(path)

    def test_missing_sidecar(self, handler, series, tmp_path):
        path = write_series(series, tmp_path / "run.csv")
        handler.metadata_path(path).unlink()
        _, metadata = handler.read_series(path)
        assert metadata == {}


class TestSnapshots:

    def test_field_round_trip(self, handler, grid3d, random_theta, tmp_path):
        theta = random_theta(grid3d)
        handler.save_field(theta, tmp_path / "theta.bin", t=1.5)
        loaded = load_field(tmp_path / "theta.bin")
        assert loaded.grid == grid3d
        assert loaded.parity == theta.parity
        assert np.array_equal(loaded.coeffs, theta.coeffs)

    def test_state_round_trip(self, handler, slice_grid, random_theta, tmp_path):
        theta = random_theta(slice_grid)
        state = SystemState(0.75, leray_project_buoyancy(theta, 20.0), theta)
        handler.save_state(state, tmp_path / "state.bin")
        loaded = handler.load_state(tmp_path / "state.bin")
        assert loaded.t == 0.75
        for a, b in zip(loaded.u.components, state.u.components):
            assert a.parity == b.parity
            assert np.array_equal(a.coeffs, b.coeffs)

    def test_header_is_readable_text(self, handler, unit_grid, random_theta, tmp_path):
        handler.save_field(random_theta(unit_grid), tmp_path / "theta.bin")
        head = (tmp_path / "theta.bin").read_bytes().split(b"end_header\n")[0].decode("ascii")
        assert head.splitlines()[0] == config.SNAPSHOT_MAGIC
        assert "parity.theta: COS,COS,SIN" in head

    def test_state_file_is_not_a_field(self, handler, slice_grid, tmp_path):
        handler.save_state(SystemState.zeros(slice_grid), tmp_path / "state.bin")
        with pytest.raises(SnapshotFormatError):
            handler.load_field(tmp_path / "state.bin")

    def test_field_file_is_not_a_state(self, handler, slice_grid, random_theta, tmp_path):
        handler.save_field(random_theta(slice_grid), tmp_path / "theta.bin")
        with pytest.raises(SnapshotFormatError):
            handler.load_state(tmp_path / "theta.bin")

    @pytest.mark.parametrize("content", [
        b"not a snapshot",
        b"wrong magic\nend_header\n",
        config.SNAPSHOT_MAGIC.encode() + b"\nNx 4\nend_header\n",
        config.SNAPSHOT_MAGIC.encode() + b"\nNx: 4\nend_header\n",
    ])
    def test_malformed(self, handler, tmp_path, content):
        path = tmp_path / "bad.bin"
        path.write_bytes(content)
        with pytest.raises(SnapshotFormatError):
            handler.load_field(path)

    def test_truncated_block(self, handler, unit_grid, random_theta, tmp_path):
        path = tmp_path / "theta.bin"
        handler.save_field(random_theta(unit_grid), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(SnapshotFormatError):
            handler.load_field(path)

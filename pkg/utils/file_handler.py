import logging
from pathlib import Path

import numpy as np
import pandas as pd

import config
from models.darcy_solver import VelocityField
from models.exceptions import SnapshotFormatError
from models.spectral_grid import Grid, Parity, SpectralField
from models.temperature_dynamics import SystemState

logger = logging.getLogger(__name__)

HEADER_END = b"end_header\n"
STATE_FIELDS = ("u1", "u2", "u3", "theta")


class FileHandler:
    """Read and write error series, sweep tables and field snapshots"""

    def __init__(self, float_format=config.CSV_FLOAT_FORMAT):
        self.float_format = float_format

    # ---- error series -------------------------------------------------

    def write_series(self, series, path):
        """CSV with the fixed column set plus a key: value sidecar at <path>.meta"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        series.rows.to_csv(path, columns=config.CSV_COLUMNS, index=False, float_format=self.float_format)
        self.write_metadata(series.metadata, self.metadata_path(path))
        logger.info("Wrote %d rows to %s", len(series.rows), path)
        return path

    def read_series(self, path):
        rows = pd.read_csv(path, dtype=float, float_precision="round_trip")
        if list(rows.columns) != config.CSV_COLUMNS:
            raise SnapshotFormatError(f"{path}: expected columns {config.CSV_COLUMNS}, got {list(rows.columns)}")
        meta_path = self.metadata_path(path)
        metadata = self.read_metadata(meta_path) if meta_path.exists() else {}
        return rows, metadata

    @staticmethod
    def metadata_path(path):
        path = Path(path)
        return path.with_name(path.name + ".meta")

    def write_metadata(self, metadata, path):
        lines = [f"{key}: {_meta_text(value)}" for key, value in metadata.items()]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @staticmethod
    def read_metadata(path):
        metadata = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition(":")
            metadata[key.strip()] = value.strip()
        return metadata

    def write_table(self, table, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format=self.float_format)
        return path

    # ---- snapshots ----------------------------------------------------

    def save_field(self, field, path, t=0.0):
        self._save(path, {"theta": field}, field.grid, t)

    def load_field(self, path):
        fields, _, _ = self._load(path)
        if set(fields) != {"theta"}:
            raise SnapshotFormatError(f"{path}: expected a single temperature field, found {sorted(fields)}")
        return fields["theta"]

    def save_state(self, state, path):
        u1, u2, u3 = state.u.components
        self._save(path, {"u1": u1, "u2": u2, "u3": u3, "theta": state.theta}, state.grid, state.t)

    def load_state(self, path):
        fields, _, t = self._load(path)
        missing = [name for name in STATE_FIELDS if name not in fields]
        if missing:
            raise SnapshotFormatError(f"{path}: state snapshot lacks {missing}")
        return SystemState(t, VelocityField(fields["u1"], fields["u2"], fields["u3"]), fields["theta"])

    def _save(self, path, fields, grid, t):
        header = [
            config.SNAPSHOT_MAGIC,
            f"Nx: {grid.Nx}", f"Ny: {grid.Ny}", f"Nz: {grid.Nz}",
            f"Lx: {grid.Lx!r}", f"Ly: {grid.Ly!r}", f"Lz: {grid.Lz!r}",
            f"t: {float(t)!r}",
            f"fields: {','.join(fields)}",
        ]
        header += [f"parity.{name}: {field.parity}" for name, field in fields.items()]
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as handle:
            handle.write(("\n".join(header) + "\n").encode("ascii"))
            handle.write(HEADER_END)
            for field in fields.values():
                handle.write(np.ascontiguousarray(field.coeffs, dtype="<f8").tobytes(order="C"))
        logger.debug("Saved snapshot %s (%s)", path, ",".join(fields))

    def _load(self, path):
        raw = Path(path).read_bytes()
        head, marker, body = raw.partition(HEADER_END)
        if not marker:
            raise SnapshotFormatError(f"{path}: missing header terminator")
        lines = head.decode("ascii").splitlines()
        if not lines or lines[0] != config.SNAPSHOT_MAGIC:
            raise SnapshotFormatError(f"{path}: not a snapshot file")
        header = {}
        for line in lines[1:]:
            key, sep, value = line.partition(":")
            if not sep:
                raise SnapshotFormatError(f"{path}: malformed header line {line!r}")
            header[key.strip()] = value.strip()
        try:
            grid = Grid(float(header["Lx"]), float(header["Ly"]), int(header["Nx"]), int(header["Ny"]),
                        int(header["Nz"]), float(header["Lz"]))
            names = header["fields"].split(",")
            parities = {name: Parity.from_string(header[f"parity.{name}"]) for name in names}
            t = float(header["t"])
        except (KeyError, ValueError) as exc:
            raise SnapshotFormatError(f"{path}: bad header ({exc})")
        block = np.frombuffer(body, dtype="<f8")
        size = int(np.prod(grid.shape))
        if block.size != size * len(names):
            raise SnapshotFormatError(f"{path}: expected {size * len(names)} coefficients, found {block.size}")
        fields = {}
        for index, name in enumerate(names):
            coeffs = block[index * size:(index + 1) * size].reshape(grid.shape).astype(np.float64)
            fields[name] = SpectralField(grid, parities[name], coeffs)
        return fields, grid, t


def _meta_text(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_series(series, path):
    return FileHandler().write_series(series, path)


def load_field(path):
    return FileHandler().load_field(path)

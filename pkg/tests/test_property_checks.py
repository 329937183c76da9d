import numpy as np

from models.interpolants import Interpolant
from models.property_checks import (
    check_darcy_energy, check_interpolant_bound, check_parseval, check_poincare, verify,
)
from models.spectral_grid import TEMPERATURE, random_field


def test_verify_passes_on_a_small_grid(small_cfg):
    table = verify(small_cfg, trials=100)
    assert list(table.columns) == ["check", "value", "tolerance", "passed"]
    assert {"parseval", "round_trip", "poincare", "skew_symmetry", "divergence", "velocity_bound",
            "darcy_energy", "c0_lowpass"} <= set(table["check"])
    assert table["passed"].all(), table[~table["passed"]]


def test_non_default_interpolant_also_checks_the_lowpass(small_cfg):
    table = verify(small_cfg.replace(interpolant="VOLUME_AVERAGE", h=0.25), trials=100)
    assert "c0_bound[VOLUME_AVERAGE]" in set(table["check"])
    assert "c0_bound[FOURIER_LOWPASS]" in set(table["check"])


def test_single_checks(slice_grid, rng):
    fields = [random_field(slice_grid, TEMPERATURE, rng) for _ in range(5)]
    assert check_parseval(fields)["passed"]
    assert check_poincare(fields)["value"] <= 1.0
    assert check_darcy_energy(fields, 50.0)["passed"]


def test_interpolant_rows(slice_grid):
    rows = check_interpolant_bound(Interpolant("FOURIER_LOWPASS", 0.2, slice_grid), trials=100, seed=5)
    assert [row["check"] for row in rows] == ["c0_bound[FOURIER_LOWPASS]", "c0_lowpass"]
    assert all(isinstance(row["passed"], (bool, np.bool_)) for row in rows)

import pandas as pd
import pytest

import cli
from utils.config_parser import write_config


@pytest.fixture
def config_file(small_cfg, tmp_path):
    return write_config(small_cfg, tmp_path / "small.cfg")


def test_run_writes_the_series(config_file, tmp_path, capsys):
    out = tmp_path / "series.csv"
    assert cli.main(["run", str(config_file), "--output", str(out)]) == cli.EXIT_OK
    assert "fitted rate" in capsys.readouterr().out
    assert len(pd.read_csv(out)) == 21
    assert (tmp_path / "series.csv.meta").exists()


def test_estimate_c0(config_file, capsys):
    assert cli.main(["estimate-c0", str(config_file), "--trials", "100"]) == cli.EXIT_OK
    assert "c0 =" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("Ra = -5\nNx = 16\nNz = 12\ndt = 1e-3\nT_final = 1\nmu = 10\nh = 0.2\n")
    assert cli.main(["run", str(path)]) == cli.EXIT_BAD_CONFIG


def test_missing_file_exit_code(tmp_path):
    assert cli.main(["verify", str(tmp_path / "absent.cfg")]) == cli.EXIT_BAD_CONFIG


def test_sweep_values_must_be_numbers(config_file):
    with pytest.raises(SystemExit):
        cli.main(["sweep", str(config_file), "--axis", "mu", "--values", "a,b"])

"""Fixtures generate real output files by invoking the controller CLI; the
plotting package consumes only those files."""
import subprocess
import sys
from pathlib import Path

import pytest

SCENARIOS = [
    "di_smoke",
    "admissible_harmonic",
    "nonadmissible_shape",
    "nonadmissible_shape_dominant",
    "reference_switch",
    "multi_harmonic",
    "multi_harmonic_nonadmissible",
]


def _cli(*args):
    result = subprocess.run([sys.executable, "-m", "harmonic_mpc.cli", *args],
                            capture_output=True, text=True)
    assert result.returncode == 0, result.stderr + result.stdout
    return result


@pytest.fixture(scope="session")
def run_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    for name in SCENARIOS:
        _cli("run", name, "--out", str(out))
    return out


@pytest.fixture(scope="session")
def sweep_output(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    _cli("sweep", "period_sweep", "--out", str(out))
    return out / "period_sweep.csv"

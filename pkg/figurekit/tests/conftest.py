"""Shared fixtures: real input directories produced by the pairtrade CLI.

figurekit consumes pairtrade only through its command line and CSV files,
so the fixtures shell out to the installed console entry point rather than
importing the simulator.
"""

import subprocess
import sys

import pytest


def pairtrade(*args: str) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "pairtrade.cli", *args],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    pairtrade("run", "--n-pair", "15", "--steps", "300", "--warmup", "0",
              "--seed", "4", "--dump-series", "--out", str(out))
    return out


@pytest.fixture(scope="session")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    for impact in ("sqrt", "linear"):
        pairtrade("sweep", "--sweep", "n-pair=10,20,30,40", "--runs", "2",
                  "--impact", impact, "--steps", "400", "--warmup", "0",
                  "--seed", "2", "--out", str(out))
    return out


@pytest.fixture(scope="session")
def washout_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("washout")
    pairtrade("washout", "--sweep", "n-pair=8,12,16", "--runs", "2",
              "--max-steps", "30000", "--seed", "5", "--out", str(out))
    return out

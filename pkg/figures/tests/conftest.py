"""Build miniature run directories by driving the primary CLI."""
import subprocess
import sys
from pathlib import Path

import pytest

FAST_CONFIG = """
basis:
  order: 3
koopman:
  edmd: {samples: 400, dt: 0.1, seed: 11}
prior: {mean: [0.4, 0.6], sigma: 0.1}
mc:
  samples: 2000
  seed: 5
  sample_export: 500
grid:
  points: 41
times: {start: 0.0, stop: 10.0, count: 5}
reduction: {order: 4, samples: 1000, seed: 9, level_window: 15.0}
"""


def run_cli(*args) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "koprop.cli", *args],
        capture_output=True,
        text=True,
        check=False,
    )


@pytest.fixture(scope="session")
def full_run(tmp_path_factory) -> Path:
    """A complete run directory: all five datasets at toy scale."""
    root = tmp_path_factory.mktemp("run")
    config = root / "config.yaml"
    config.write_text(FAST_CONFIG)
    single = root / "single.yaml"
    single.write_text(FAST_CONFIG + "schedule:\n  legs: [5.0]\n")
    double = root / "double.yaml"
    double.write_text(FAST_CONFIG + "schedule:\n  legs: [2.5, 2.5]\n")
    out = root / "outputs"
    for command, cfg in (
        ("eigen", config),
        ("propagate-state", config),
        ("propagate-pdf", single),
        ("recursive", double),
    ):
        result = run_cli(command, "--config", str(cfg), "--out", str(out))
        assert result.returncode == 0, (command, result.stderr)
    return out


@pytest.fixture(scope="session")
def eigen_only_run(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("eigen_run")
    config = root / "config.yaml"
    config.write_text(FAST_CONFIG)
    out = root / "outputs"
    result = run_cli("eigen", "--config", str(config), "--out", str(out))
    assert result.returncode == 0, result.stderr
    return out

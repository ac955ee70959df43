"""Shared fixtures and acceptance-criterion reporting.

Heavy artifacts (the order-9 Duffing model, the 500 s Monte Carlo ensemble)
are session-scoped so the acceptance suite and the module tests share one
computation.  Acceptance tests register one line per criterion through the
``record_criterion`` fixture; the summary is printed at the end of the run.
"""
from __future__ import annotations

import warnings

import numpy as np
import pytest

from koprop import (
    BasisSet,
    BoxDomain,
    GaussianPdf,
    KoopmanModel,
    duffing_system,
    mc_propagate,
)

DEFAULT_HALFWIDTH = 1.22
GRID_HALFWIDTH = 1.5
GRID_POINTS = 151
MC_SEED = 20240811
MC_COUNT = 100_000

_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def duffing():
    return duffing_system()


@pytest.fixture(scope="session")
def duffing_box():
    return BoxDomain([-DEFAULT_HALFWIDTH] * 2, [DEFAULT_HALFWIDTH] * 2)


@pytest.fixture(scope="session")
def basis9(duffing_box):
    return BasisSet.create(duffing_box, 9)


@pytest.fixture(scope="session")
def galerkin9(duffing, basis9):
    return KoopmanModel.from_galerkin(duffing, basis9)


@pytest.fixture(scope="session")
def prior():
    return GaussianPdf([0.4, 0.6], 0.01 * np.eye(2))


@pytest.fixture(scope="session")
def grid_axes():
    return [np.linspace(-GRID_HALFWIDTH, GRID_HALFWIDTH, GRID_POINTS)] * 2


@pytest.fixture(scope="session")
def mc_500(duffing, prior):
    """The headline Monte Carlo ensemble: 1e5 samples flowed to 500 s."""
    return mc_propagate(prior, duffing, 500.0, MC_COUNT, MC_SEED)


@pytest.fixture
def record_criterion():
    def _record(name: str, passed: bool, detail: str = ""):
        _criteria.append((name, bool(passed), detail))

    return _record


@pytest.fixture(autouse=True)
def _quiet_extrapolation():
    """Long-horizon pull-backs intentionally extrapolate; keep logs readable."""
    from koprop import ExtrapolationWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        yield


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed, detail in _criteria:
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {name}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)

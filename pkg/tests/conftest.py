"""Shared fixtures.

The desk-scale objects (N=256, d=2, H=1/2, M=10^4 weighted ensemble) are
expensive, so they are session-scoped and shared by the acceptance tests;
unit tests use the small N=64 fixtures.
"""

import numpy as np
import pytest

from edwardsim import (
    GridCovariance,
    LadderConfig,
    ModelParams,
    edwards_ensemble,
)

# One line per acceptance criterion, printed after the run so the verdicts
# survive pytest's stdout capture.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def desk_params() -> ModelParams:
    return ModelParams(H=0.5, d=2, T=1.0, g=0.1, N=256, seed=0)


@pytest.fixture(scope="session")
def desk_cov(desk_params) -> GridCovariance:
    return GridCovariance(desk_params)


@pytest.fixture(scope="session")
def desk_ladder() -> LadderConfig:
    return LadderConfig(eps0=0.1, levels=5)


@pytest.fixture(scope="session")
def desk_ensemble(desk_params, desk_cov, desk_ladder):
    """10^4 weighted paths at desk scale; the workhorse for the Monte Carlo
    acceptance criteria."""
    return edwards_ensemble(desk_params, 10_000, desk_ladder, cov=desk_cov)


@pytest.fixture(scope="session")
def small_params() -> ModelParams:
    return ModelParams(H=0.5, d=2, T=1.0, g=0.1, N=64, seed=0)


@pytest.fixture(scope="session")
def small_cov(small_params) -> GridCovariance:
    return GridCovariance(small_params)


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(20260815)

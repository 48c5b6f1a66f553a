"""Pytest configuration and fixtures."""
import pytest

from app.continuation import ProblemSetup, solve_at
from app.gas_model import GasModel
from app.geometry_grid import Obstacle, build_grid
from app.schemas import SolverConfig
from app.stream_solver import solve
from app.upstream_profile import UpstreamProfile, truncate


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow solver tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size solves, skipped without --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def gas2():
    """gamma = 2, where most closed forms are simplest."""
    return GasModel(2.0)


@pytest.fixture
def gas14():
    return GasModel(1.4)


@pytest.fixture
def uniform4():
    """Uniform unit flow at density 4."""
    return UpstreamProfile.uniform(1.0, 4.0)


@pytest.fixture
def vortical():
    """u = 1 + 2 (r + 1) e^-r at density 16."""
    return UpstreamProfile.exp_vortical(1.0, 2.0, 16.0)


@pytest.fixture
def small_config():
    """Solver settings small enough for a 16 x 16 grid."""
    return SolverConfig(eps0=0.05, k_schedule=[0.1, 0.0])


@pytest.fixture
def small_grid():
    """No obstacle, [-2, 2] x [0, 3], 16 x 16 cells."""
    return build_grid(Obstacle.none(), 2.0, 3.0, 16, 16)


@pytest.fixture
def uniform_trunc(uniform4):
    return truncate(uniform4, 3.0)


@pytest.fixture
def uniform_field(small_grid, uniform_trunc, gas2, small_config):
    """Converged field for uniform flow without obstacle (exact solution psi_bar)."""
    return solve(small_grid, uniform_trunc, gas2, small_config)


@pytest.fixture(scope="session")
def bump_setup():
    """Uniform unit flow at density 4 past a bump of height 0.3 on [-8, 8] x [0, 6]."""
    return ProblemSetup(gas=GasModel(2.0), profile=UpstreamProfile.uniform(1.0, 4.0),
                        obstacle=Obstacle.smooth_bump(0.3), X=8.0, L=6.0, nx=128, nr=64,
                        solver=SolverConfig())


@pytest.fixture(scope="session")
def bump_record(bump_setup):
    """Certified solve of the bump problem, shared by the slow tests."""
    return solve_at(bump_setup, 4.0)

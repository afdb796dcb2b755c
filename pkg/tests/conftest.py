import numpy as np
import pytest

from penalized_nls.config import load_config
from penalized_nls.domain import Mesh, RegionSpec, Superlevel, make_potential
from penalized_nls.limit_ground_state import LimitProblemParams, shoot_ground_state
from penalized_nls.penalized import PenalizedProblem

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def profile_1d():
    return shoot_ground_state(LimitProblemParams(1, 3, 1.0))


@pytest.fixture(scope="session")
def profile_3d():
    return shoot_ground_state(LimitProblemParams(3, 3, 1.0))


@pytest.fixture(scope="session")
def cfg_1d():
    return load_config("inverse_poly4_1d")


def small_1d_problem(eps=0.1, M=801, L=5.0, mu=0.5, level=0.9):
    V = make_potential(1, "inverse_poly4", decay_class="quadratic_slow")
    region = RegionSpec(Superlevel(V, level, [0.0]), [0.0], 0.1, mu=mu)
    return PenalizedProblem(V, region, eps, 3, Mesh(1, L, M))


def small_2d_problem(eps=0.3, M=41, L=3.0):
    V = make_potential(2, "gaussian_bump")
    region = RegionSpec(Superlevel(V, 0.7, [0.0, 0.0]), [0.0, 0.0], 0.1)
    return PenalizedProblem(V, region, eps, 3, Mesh(2, L, M))


@pytest.fixture
def problem_1d():
    return small_1d_problem()


@pytest.fixture
def problem_2d():
    return small_2d_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)

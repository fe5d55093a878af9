import numpy as np
import pytest

from biharmonic_lab.field import RadialGrid
from biharmonic_lab.ground_state import petviashvili_solve
from biharmonic_lab.params import ModelParams


@pytest.fixture(scope="session")
def focusing_params():
    return ModelParams(5, 3.0, "focusing")


@pytest.fixture(scope="session")
def ground_state(focusing_params):
    return petviashvili_solve(focusing_params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_grid():
    return RadialGrid(5, 20.0, 128)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])

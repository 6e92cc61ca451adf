import numpy as np
import pytest

from spnsde import models
from spnsde.structural import minimal_psemiflows, place_bounds

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def cycle():
    return models.cycle()


@pytest.fixture
def sir1():
    return models.sir("exp1")


@pytest.fixture
def sir2():
    return models.sir("exp2")


def structure(model):
    """(basis, semiflow bounds) for a covered model."""
    basis = minimal_psemiflows(model)
    return basis, place_bounds(model, basis)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)

import numpy as np
import pytest

from otrd.fixtures import five_atom_source, ten_atom_source

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def five_atom():
    return five_atom_source()


@pytest.fixture(scope="session")
def ten_atom():
    return ten_atom_source()

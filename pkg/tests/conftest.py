import numpy as np
import pytest

from lowrank_kriging import Box, grid_design, random_design


@pytest.fixture
def unit_square():
    return Box.unit(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid70():
    return grid_design(70)


@pytest.fixture
def small_random():
    return random_design(20, seed=3)


# one "ACCEPTANCE <n> PASS|FAIL ..." line per criterion, repeated in the terminal summary
_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    def log(number, title, passed, detail=""):
        line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {title}  {detail}".rstrip()
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from kinalloc import FamilyGame, FitnessFunction

LOG = FitnessFunction.log(1.0, 1.0)


def pair(r_pc, r_cp, budgets, f_p=LOG, f_c=LOG):
    return FamilyGame(["p", "c"], budgets, [[1.0, r_pc], [r_cp, 1.0]], [f_p, f_c])


@pytest.fixture
def parent_child():
    return pair(0.5, 0.5, (3.0, 0.1))


@pytest.fixture
def altruist_parent():
    return pair(0.5, 0.5, (1.0, 0.1), f_c=FitnessFunction.log(10.0, 1.0))


@pytest.fixture
def mutual_half():
    return pair(0.5, 0.5, (1.0, 1.0))


@pytest.fixture
def unrelated():
    return pair(0.0, 0.0, (1.0, 1.0))


PARENT_CHILD_EQ = np.array([[2.4, 0.6], [0.0, 0.1]])


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

"""Shared fixtures: the expensive foliation runs are computed once per session."""

import numpy as np
import pytest

from jdisc.continuation import ContinuationConfig, run_continuation
from jdisc.structures import bump_perturbation, flat_triangular

# (criterion, passed, detail) lines collected by the acceptance tests
ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


@pytest.fixture(scope="session")
def bump_structure():
    return bump_perturbation()


@pytest.fixture(scope="session")
def flat_foliation():
    return run_continuation(flat_triangular(), ContinuationConfig())


@pytest.fixture(scope="session")
def bump_foliation(bump_structure):
    return run_continuation(bump_structure, ContinuationConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][:-1])):
            terminalreporter.write_line(line)

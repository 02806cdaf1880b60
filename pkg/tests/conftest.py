import numpy as np
import pytest

from nambu.field import Grid3


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid8():
    return Grid3(8)


@pytest.fixture(scope="session")
def grid16():
    return Grid3(16)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, format_result
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for result in sorted(RESULTS):
        terminalreporter.write_line(format_result(*result))

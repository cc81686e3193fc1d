import numpy as np
import pytest

from kfpkernel import fixtures

ALL_FIXTURES = sorted(fixtures.FIXTURES)


@pytest.fixture(params=ALL_FIXTURES)
def any_spec(request):
    return fixtures.get(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config._acceptance_lines = []

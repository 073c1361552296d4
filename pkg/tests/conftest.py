import pytest

from nessmix.core import limiting_boundary, make_boundary

# Acceptance criteria record their outcome here; the terminal summary prints
# one line per criterion after the run.
ACCEPTANCE_LINES = {}


@pytest.fixture
def unit():
    return limiting_boundary(0.0, 1.0)


@pytest.fixture
def b13():
    return make_boundary(1.0, 3.0)


@pytest.fixture
def b12():
    return make_boundary(1.0, 2.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

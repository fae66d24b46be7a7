import warnings

import pytest

from ehstore.channel import SparseStateWarning

ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def _quiet_sparse_states():
    # deep chain states are rarely visited; tests that care assert on the warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SparseStateWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

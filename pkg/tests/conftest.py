"""Shared fixtures: the acceptance gate records one line per criterion."""

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record a criterion verdict so it survives into the run summary."""

    def record(line):
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

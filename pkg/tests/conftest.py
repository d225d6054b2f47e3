"""Shared pytest hooks.

The acceptance tests append one human-readable result line per criterion to
``ACCEPTANCE_LINES`` (via the ``acceptance_log`` fixture); the hook below
echoes them in the terminal summary so the pass/fail verdicts are visible
even when pytest captures stdout.
"""

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

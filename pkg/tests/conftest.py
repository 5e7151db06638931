"""Shared pytest wiring.

The acceptance tests record one line per criterion here; the terminal
summary hook prints them after the run so the list is visible without
-s or digging through captured output.
"""

from contextlib import contextmanager

import pytest

_CRITERIA: list[tuple[str, bool]] = []


@pytest.fixture
def criterion():
    """Context manager that records PASS/FAIL for one acceptance line."""

    @contextmanager
    def record(name):
        try:
            yield
        except BaseException:
            _CRITERIA.append((name, False))
            raise
        _CRITERIA.append((name, True))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")

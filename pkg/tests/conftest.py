"""Collects one pass/fail line per acceptance criterion and prints them at the end."""

import pytest

ACCEPTANCE = []


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE, key=lambda x: str(x[0])):
        terminalreporter.write_line(line)

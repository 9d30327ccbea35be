from __future__ import annotations

import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_log(capsys):
    """Print a report inline and keep its summary line for the end-of-session table."""

    def log(report):
        _ACCEPTANCE[report.criterion] = report.summary_line()
        with capsys.disabled():
            print("\n" + report.text())

    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])

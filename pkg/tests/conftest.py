import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from acceptance_log import LOG  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not LOG:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(LOG):
        terminalreporter.write_line(LOG[number])

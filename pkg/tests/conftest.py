import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the terminal summary")


def pytest_runtest_logreport(report):
    label = getattr(report, "criterion", None)
    if label is None:
        return
    failed = report.failed
    if report.when == "call" or failed:
        previous = _criteria.get(label)
        _criteria[label] = "FAIL" if failed or previous == "FAIL" else "PASS"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria, key=lambda s: int(s.split()[0][1:])):
        terminalreporter.write_line(f"{_criteria[label]}  {label}")

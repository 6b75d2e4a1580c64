from collections import defaultdict

import pytest

_DESCRIPTIONS = {}
_OUTCOMES = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, description): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, description = marker.args
    _DESCRIPTIONS[number] = description
    if report.when == "call" or report.failed:
        _OUTCOMES[number].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _DESCRIPTIONS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_DESCRIPTIONS):
        results = _OUTCOMES[number]
        status = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"AC{number} {status} {_DESCRIPTIONS[number]}")
